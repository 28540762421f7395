"""sparse index

Revision ID: 20261019_0001
Revises:
Create Date: 2026-10-19 10:12:40.118305

"""
from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision = "20261019_0001"
down_revision = None
branch_labels = None
depends_on = None


def upgrade() -> None:
    op.create_table(
        "documents",
        sa.Column("id", sa.String(), primary_key=True),
        sa.Column("lang", sa.String(), nullable=False),
        sa.Column("length", sa.Integer(), nullable=False),
    )

    op.create_table(
        "postings",
        sa.Column("term", sa.String(), primary_key=True),
        sa.Column("doc_id", sa.String(), sa.ForeignKey("documents.id", ondelete="CASCADE"), primary_key=True),
        sa.Column("tf", sa.Integer(), nullable=False),
    )

    op.create_table(
        "index_settings",
        sa.Column("key", sa.String(), primary_key=True),
        sa.Column("value", sa.String(), nullable=False),
    )


def downgrade() -> None:
    op.drop_table("index_settings")
    op.drop_table("postings")
    op.drop_table("documents")
