"""
Точка входа CLI градиентометра на столкновениях ультрахолодных атомов.

    python main.py <command> [--config path] [--out dir] [--threads n] [--seed u64] [--log-level LEVEL]
"""
import argparse
import os
import sys
from typing import List, Optional

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))

from app.config import RunConfig  # noqa: E402
from app.runner import COMMANDS  # noqa: E402
from service.errors import ToolkitError  # noqa: E402
from service.logger import logger, set_console_level  # noqa: E402
from service.settings import DEFAULT_THREADS, EXIT_CODES, TOOLKIT_NAME, TOOLKIT_VERSION  # noqa: E402


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOLKIT_NAME,
        description="Сканы рассеяния, прохождения, информации Фишера и Монте-Карло для магнитометра на столкновениях.",
    )
    parser.add_argument("--version", action="version", version=f"{TOOLKIT_NAME} {TOOLKIT_VERSION}")
    parser.add_argument("command", choices=sorted(COMMANDS), help="Команда для выполнения.")
    parser.add_argument("--config", default=None, help="Файл конфигурации (строки section.key = value).")
    parser.add_argument("--out", default=None, help="Каталог для артефактов (переопределяет output.dir).")
    parser.add_argument("--threads", type=int, default=DEFAULT_THREADS, help="Максимальное число процессов.")
    parser.add_argument("--seed", type=int, default=None, help="Seed генератора (переопределяет mc.seed).")
    parser.add_argument("--log-level", default="WARNING", help="Уровень логов в консоль (DEBUG, INFO, WARNING, ERROR).")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_console_level(args.log_level)
    try:
        config = RunConfig.load(args.config).with_overrides({"mc.seed": args.seed, "output.dir": args.out})
        logger.info(f"Запуск {args.command} (конфигурация: {args.config or 'по умолчанию'})")
        written = COMMANDS[args.command](config, config["output.dir"], max(args.threads, 1))
    except ToolkitError as error:
        logger.error(f"{args.command}: {error}")
        return error.exit_code
    logger.info(f"{args.command} завершена, файлов записано: {len(written)}")
    return EXIT_CODES["ok"]


if __name__ == "__main__":
    sys.exit(main())
