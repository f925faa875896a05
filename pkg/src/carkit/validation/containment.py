import functools

from carkit._helpers import get_argument_dict, signature_of
from carkit.exceptions import DecorationError, ValidationError


def validate_containment(error_type=ValidationError, /, **collections):
    """Decorator for making sure that values passed to a function are
    contained within a given collection.

    Takes keyword arguments of `ARG_NAME=COLLECTION`. Used for the tagged
    choices of the toolkit (schemes, decode methods, metric kinds, modes).

    Args:
        error_type (type): exception class raised on a violation.

    Raises:
        DecorationError if one or more arguments specified do not exist in the function
            signature, or if a collection does not support the "in" operator.
    """
    def outer(func):
        signature = signature_of(func)
        for arg_name, collection in collections.items():
            if arg_name not in signature.parameters:
                raise DecorationError(f'Cannot specify allowed values for non-existent argument "{arg_name}".')
            elif not hasattr(collection, '__contains__'):
                raise DecorationError(f'Type for argument "{arg_name}" does not allow containment validation.')

        @functools.wraps(func)
        def inner(*args, **kwargs):
            all_args = get_argument_dict(signature, args, kwargs)

            for arg_name, collection in collections.items():
                given_value = all_args[arg_name]
                try:
                    found = given_value in collection
                except TypeError:
                    found = False
                if not found:
                    allowed = ', '.join(sorted(str(_plain(x)) for x in collection))
                    raise error_type(f'Value for "{arg_name}" ({_plain(given_value)!r}) is not one of: {allowed}')

            return func(*args, **kwargs)
        return inner
    return outer


def _plain(value):
    # str-valued enums render as their value
    return getattr(value, 'value', value)
