import inspect

from .arguments import get_argument_dict


def signature_of(func) -> inspect.Signature:
    """Signature of `func` with decorators unwrapped."""
    return inspect.signature(inspect.unwrap(func))
