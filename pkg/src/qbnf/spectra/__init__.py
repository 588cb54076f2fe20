from .clusters import *  # noqa: F401,F403
from .extrema import *  # noqa: F401,F403
from .liouville import *  # noqa: F401,F403
from .density import *  # noqa: F401,F403
from .fits import *  # noqa: F401,F403
from .lowlying import *  # noqa: F401,F403
