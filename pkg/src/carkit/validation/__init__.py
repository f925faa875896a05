from .containment import validate_containment
from .range import validate_range
from .expression import validate_expression

from .lazy_evaluation import X
