import inspect
from typing import Dict


def get_argument_dict(signature: inspect.Signature, args: tuple, kwargs: dict) -> Dict[str, object]:
    """Converts *args and **kwargs to a dictionary of named arguments,
    with defaults filled in for anything the caller left out.

    Args:
        signature (inspect.Signature): the signature of the wrapped function.
        args (tuple): the positional arguments
        kwargs (dict): the keyword arguments

    Returns:
        A dictionary of {arg_name: arg_value}
    """
    bound = signature.bind(*args, **kwargs)
    bound.apply_defaults()
    return dict(bound.arguments)
