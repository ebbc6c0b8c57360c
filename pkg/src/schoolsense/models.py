from __future__ import annotations

from sqlalchemy import BigInteger, Float, Integer, SmallInteger, String
from sqlalchemy.orm import Mapped, mapped_column

from .db import Base


class SummaryRecord(Base):
    __tablename__ = "interval_summaries"

    resource_id: Mapped[str] = mapped_column(String(255), primary_key=True)
    granularity: Mapped[int] = mapped_column(SmallInteger, primary_key=True)
    start: Mapped[int] = mapped_column(BigInteger, primary_key=True)  # UTC epoch ms
    end: Mapped[int] = mapped_column(BigInteger, nullable=False)
    avg: Mapped[float] = mapped_column(Float, nullable=False)
    min: Mapped[float] = mapped_column(Float, nullable=False)
    max: Mapped[float] = mapped_column(Float, nullable=False)
    count: Mapped[int] = mapped_column(Integer, nullable=False)
    energy_wh: Mapped[float | None] = mapped_column(Float, nullable=True)  # power resources
    total: Mapped[float | None] = mapped_column(Float, nullable=True)  # precipitation-like
