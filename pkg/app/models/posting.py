from sqlalchemy import Column, Integer, String, ForeignKey
from app.core.db import Base


class Posting(Base):
    __tablename__ = "postings"
    term = Column(String, primary_key=True)
    doc_id = Column(String, ForeignKey("documents.id", ondelete="CASCADE"), primary_key=True)
    tf = Column(Integer, nullable=False)
