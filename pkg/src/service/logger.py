import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from service.settings import LOG_DIR

# Каталог логов может не существовать при первом запуске
os.makedirs(LOG_DIR, exist_ok=True)

# Очищаем файл all_logs.log при старте программы
all_logs_path = os.path.join(LOG_DIR, 'all_logs.log')
with open(all_logs_path, 'w'):
    pass  # Просто открываем файл в режиме записи, чтобы очистить его

# Формат логов
log_format = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'

# Создаем форматтер с заданным форматом
formatter = logging.Formatter(log_format)

# Создаем обработчик для всех логов
all_logs_handler = RotatingFileHandler(all_logs_path, maxBytes=10000000, backupCount=3)
all_logs_handler.setLevel(logging.DEBUG)
all_logs_handler.setFormatter(formatter)  # Применяем форматтер к обработчику

# Создаем обработчик только для логов уровня INFO
info_logs_handler = RotatingFileHandler(os.path.join(LOG_DIR, 'info_logs.log'), maxBytes=10000000, backupCount=3)
info_logs_handler.setLevel(logging.INFO)
info_logs_handler.setFormatter(formatter)  # Применяем форматтер к обработчику

# Создаем обработчик для диагностики CLI в stderr (уровень задается --log-level)
console_handler = logging.StreamHandler(sys.stderr)
console_handler.setLevel(logging.WARNING)
console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))  # Короткий формат для консоли

# Создаем логгер
logger = logging.getLogger('gradiometer')
logger.setLevel(logging.DEBUG)

# Добавляем обработчики к логгеру (один раз, даже при повторном импорте)
if not logger.handlers:
    logger.addHandler(all_logs_handler)
    logger.addHandler(info_logs_handler)
    logger.addHandler(console_handler)


class InfoFilter(logging.Filter):
    def filter(self, record):
        return record.levelno == logging.INFO


# Применяем фильтр к обработчику info_logs_handler
info_logs_handler.addFilter(InfoFilter())


def set_console_level(level_name: str) -> None:
    # Неизвестное имя уровня оставляет WARNING
    console_handler.setLevel(getattr(logging, level_name.upper(), logging.WARNING))
