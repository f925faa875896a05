import functools
import math

from carkit._helpers import get_argument_dict, signature_of
from carkit.exceptions import DecorationError, ValidationError


def validate_range(error_type=ValidationError, /, **ranges):
    """Decorator for making sure that values passed to a function are
    in an appropriate closed range.

    Takes keyword arguments of `ARG_NAME=(LOWER, UPPER)`, where either bound
    may be None to leave that side open. Array arguments must lie entirely
    in the range.

    Args:
        error_type (type): exception class raised on a violation.

    Raises:
        DecorationError if one or more arguments specified do not exist in the function
            signature, or a range is not a pair of numbers.
    """
    def outer(func):
        signature = signature_of(func)
        bounds = {}
        for arg_name, range_ in ranges.items():
            if arg_name not in signature.parameters:
                raise DecorationError(f'Cannot specify range for non-existent argument "{arg_name}".')
            if not isinstance(range_, (list, tuple)) or len(range_) != 2:
                raise DecorationError(f'Range for "{arg_name}" must be a (lower, upper) pair.')
            lower = -math.inf if range_[0] is None else range_[0]
            upper = math.inf if range_[1] is None else range_[1]
            if not all(isinstance(x, (int, float)) for x in (lower, upper)):
                raise DecorationError(f'Range for "{arg_name}" must contain only numbers.')
            bounds[arg_name] = min(lower, upper), max(lower, upper)

        @functools.wraps(func)
        def inner(*args, **kwargs):
            all_args = get_argument_dict(signature, args, kwargs)

            for arg_name, (lower, upper) in bounds.items():
                given_value = all_args[arg_name]
                try:
                    in_range = _all(lower <= given_value) and _all(given_value <= upper)
                except TypeError:
                    raise error_type(f'Cannot validate the range of argument "{arg_name}", as it is non-numeric.') from None
                if not in_range:
                    raise error_type(f'Value for "{arg_name}" must be in the range [{lower}, {upper}], but got {given_value}.')

            return func(*args, **kwargs)
        return inner
    return outer


def _all(result) -> bool:
    if hasattr(result, 'all'):
        return bool(result.all())
    return bool(result)
