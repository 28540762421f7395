from sqlalchemy import Column, Integer, String
from app.core.db import Base


class IndexedDocument(Base):
    __tablename__ = "documents"
    id = Column(String, primary_key=True)
    lang = Column(String, nullable=False)
    length = Column(Integer, nullable=False)
