from app.core.db import Base
from app.models.document import IndexedDocument
from app.models.posting import Posting
from app.models.setting import IndexSetting
