import os
from pathlib import Path
from typing import Optional, List, Any, Type, TypeVar

from sqlalchemy import create_engine, select, update
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from src.storage.models import Base, RunRecord, AblationRow
from src.utils.logger import get_logger

logger = get_logger("storage.database")

T = TypeVar('T')


class Database:
    """
    Реестр запусков в SQLite
    """

    def __init__(self, db_path: str = "runs/registry.sqlite"):
        """
        Инициализация базы данных

        Args:
            db_path: Путь к файлу базы данных
        """
        db_dir = Path(db_path).parent
        os.makedirs(db_dir, exist_ok=True)

        self.db_url = f"sqlite:///{db_path}"
        self.engine: Engine = create_engine(self.db_url, echo=False, future=True)
        self.session_factory = sessionmaker(self.engine, expire_on_commit=False, class_=Session)

        logger.debug(f"Реестр запусков инициализирован: {db_path}")

    def create_tables(self):
        """
        Создание таблиц в базе данных
        """
        Base.metadata.create_all(self.engine)

    def get_session(self) -> Session:
        return self.session_factory()

    def add(self, obj: Any):
        """
        Добавление объекта в базу данных

        Args:
            obj: Объект для добавления
        """
        with self.get_session() as session:
            session.add(obj)
            session.commit()

    def get_all(self, model: Type[T]) -> List[T]:
        with self.get_session() as session:
            return list(session.execute(select(model)).scalars().all())

    def close(self):
        self.engine.dispose()

    # Запуски

    def start_run(self, command: str, config_hash: str, out_dir: str) -> int:
        """
        Регистрация начала запуска

        Returns:
            int: ID записи
        """
        record = RunRecord(command=command, config_hash=config_hash, out_dir=out_dir)
        self.add(record)
        return record.id

    def finish_run(self, run_id: int, exit_code: int) -> bool:
        """
        Отметка завершения запуска

        Args:
            run_id: ID записи
            exit_code: Код выхода

        Returns:
            bool: True, если запись обновлена
        """
        status = "FINISHED" if exit_code == 0 else "FAILED"
        with self.get_session() as session:
            stmt = update(RunRecord).where(RunRecord.id == run_id).values(status=status, exit_code=exit_code)
            result = session.execute(stmt)
            session.commit()
            return result.rowcount > 0

    # Абляции

    def get_ablation_row(self, variant: str, seed: int, config_hash: str) -> Optional[AblationRow]:
        """
        Поиск готового результата варианта абляции

        Args:
            variant: Имя варианта
            seed: Зерно
            config_hash: Хэш разрешенной конфигурации варианта

        Returns:
            Optional[AblationRow]: Найденная строка или None
        """
        with self.get_session() as session:
            stmt = select(AblationRow).where(
                AblationRow.variant == variant,
                AblationRow.seed == seed,
                AblationRow.config_hash == config_hash
            )
            return session.execute(stmt).scalar_one_or_none()

    def save_ablation_row(self, row: AblationRow) -> AblationRow:
        """Сохранение результата варианта (заменяет прежний с тем же ключом)"""
        with self.get_session() as session:
            existing = session.execute(select(AblationRow).where(
                AblationRow.variant == row.variant,
                AblationRow.seed == row.seed,
                AblationRow.config_hash == row.config_hash
            )).scalar_one_or_none()
            if existing is not None:
                session.delete(existing)
                session.flush()
            session.add(row)
            session.commit()
            logger.debug(f"Результат абляции сохранен: {row.variant}, seed={row.seed}")
            return row
