"""
CPPREDICTOR Version Information

Файл с константами версии для программного доступа
и централизованного управления версионностью проекта.
"""

__version__ = "1.1.0"
__date__ = "2026-10-12"
__author__ = "CPPREDICTOR Team"
__description__ = "Регрессия и классификация с весовым тензором в CP-формате"

# Версия формата файла модели (поле format_version)
MODEL_FORMAT_VERSION = 1

# История версий
VERSION_HISTORY = {
    "1.1.0": {
        "date": "2026-10-12",
        "description": "Порядковая регуляризация, команды sweep-d и sweep-rank"
    },
    "1.0.0": {
        "date": "2026-09-28",
        "description": "Первый релиз: CP-предиктор, нормированные полиномиальные признаки, CLI"
    },
}
