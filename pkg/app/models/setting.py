from sqlalchemy import Column, String
from app.core.db import Base


class IndexSetting(Base):
    __tablename__ = "index_settings"
    key = Column(String, primary_key=True)
    value = Column(String, nullable=False)
