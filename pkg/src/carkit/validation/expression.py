import functools

from carkit._helpers import get_argument_dict, signature_of
from carkit.exceptions import DecorationError, ValidationError
from .lazy_evaluation import is_expression


def validate_expression(error_type=ValidationError, /, **expressions):
    """Decorator for making sure that values passed to a function meet
    a criteria specified by an arbitrary expression.

    Takes keyword arguments of `ARG_NAME=EXPRESSION`. An expression that
    evaluates to an array passes only if every element is true.

    Args:
        error_type (type): exception class raised on a violation.

    Raises:
        DecorationError if one or more arguments specified do not exist in the function
            signature, or if the values given are not expressions.
    """
    def outer(func):
        signature = signature_of(func)
        for arg_name, expression in expressions.items():
            if arg_name not in signature.parameters:
                raise DecorationError(f'Cannot specify expression for non-existent argument "{arg_name}".')
            if not is_expression(expression):
                raise DecorationError(f'Expression for "{arg_name}" must be an expression, not {type(expression).__name__}.')

        @functools.wraps(func)
        def inner(*args, **kwargs):
            all_args = get_argument_dict(signature, args, kwargs)

            for arg_name, expression in expressions.items():
                given_value = all_args[arg_name]
                try:
                    result = expression.substitute(given_value)
                    is_valid = bool(result.all()) if hasattr(result, 'all') else bool(result)
                except (TypeError, AttributeError):
                    is_valid = False
                if not is_valid:
                    raise error_type(
                        f'Value for "{arg_name}" does not meet the required criteria: '
                        f'{expression.describe(arg_name)}'
                    )

            return func(*args, **kwargs)
        return inner
    return outer
