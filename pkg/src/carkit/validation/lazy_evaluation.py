"""Deferred expressions over a single placeholder `X`.

Applying comparisons to `X` builds a tree instead of computing anything.
The tree is evaluated later with `substitute`, and `describe` renders it
with an argument name, which is how precondition failures explain
themselves:

```
>>> (X.a < X.b).substitute(depth_range)
True
>>> (X.a > 0).describe('depth_range')
'(depth_range.a > 0)'
>>> ((X.ndim == 2) & (X.size > 0)).describe('logits')
'((logits.ndim == 2) & (logits.size > 0))'
```
"""
import operator

from carkit.exceptions import ExpressionError

#################### Operators ####################
# dunder name -> (evaluator, infix symbol, reflected)
_binary_operators = {
    # Comparison
    'eq': (operator.eq, '==', False),
    'ne': (operator.ne, '!=', False),
    'gt': (operator.gt, '>', False),
    'ge': (operator.ge, '>=', False),
    'lt': (operator.lt, '<', False),
    'le': (operator.le, '<=', False),

    # Bitwise, used as elementwise logic on arrays
    'and': (operator.and_, '&', False),
    'rand': (operator.and_, '&', True),
    'or': (operator.or_, '|', False),
    'ror': (operator.or_, '|', True),
}
# Python forces these to return a concrete value, so they cannot stay deferred
_rejected_operators = {
    'len': 'Use of len() in test expression is unsupported, use X.size or X.shape.',
    'contains': 'Use of "in" keyword in test expression is unsupported, use validate_containment.',
    'bool': 'Expressions have no truth value; chained comparisons and and/or/not are unsupported.',
}


def _make_binary(name: str):
    fn, symbol, reflected = _binary_operators[name]

    def operator_(self, other):
        left, right = (other, self) if reflected else (self, other)
        return _ExpressionNode(fn, symbol, left, right)
    return operator_


def _make_rejected(reason: str):
    def operator_(*args, **kwargs):
        raise ExpressionError(reason)
    return operator_


class _OperatorAbsorber:
    """Base for anything that turns operators applied to it into tree nodes."""

    def __getattr__(self, name: str):
        """Defers ``obj.name`` until substitution.

        Dunder lookups are refused so that copy, pickle and numpy probing
        do not grow the tree.
        """
        if name.startswith('__'):
            raise AttributeError(name)
        return _GetAttrExpressionNode(name, self)


def _install_operators(cls):
    """Attaches the deferred and rejected dunder methods to `cls`."""
    for name in _binary_operators:
        setattr(cls, f'__{name}__', _make_binary(name))
    for name, reason in _rejected_operators.items():
        setattr(cls, f'__{name}__', _make_rejected(reason))
    # __eq__ is overridden, so the default hash is dropped
    cls.__hash__ = object.__hash__
    return cls

_install_operators(_OperatorAbsorber)


def _substitute(arg, placeholder_value):
    if is_expression(arg):
        return arg.substitute(placeholder_value)
    return arg


def _describe(arg, name: str) -> str:
    if is_expression(arg):
        return arg.describe(name)
    return repr(arg)


#################### Nodes ####################
class _ExpressionNode(_OperatorAbsorber):
    """An operator applied to operands that may themselves be deferred.

    Nodes absorb operators too, so larger trees build up naturally.
    """

    def __init__(self, fn, symbol: str, *operands) -> None:
        """
        Args:
            fn (callable): evaluator applied to the substituted operands.
            symbol (str): how the operation is rendered in messages.
            *operands: constants, placeholders or other nodes.
        """
        self._fn = fn
        self._symbol = symbol
        self._operands = operands

    def substitute(self, placeholder_value):
        """Evaluates the tree with `placeholder_value` in place of `X`.

        Returns:
            Whatever the operator returns; arrays for elementwise comparisons.
        """
        values = [_substitute(x, placeholder_value) for x in self._operands]
        return self._fn(*values)

    def describe(self, name: str) -> str:
        """Renders the expression with the placeholder spelled as `name`."""
        parts = [_describe(x, name) for x in self._operands]
        return f'({parts[0]} {self._symbol} {parts[1]})'


class _GetAttrExpressionNode(_ExpressionNode):
    """Deferred attribute lookup."""

    def __init__(self, attr: str, obj) -> None:
        super().__init__(getattr, '.', obj)
        self._attr = attr

    def substitute(self, placeholder_value):
        obj = _substitute(self._operands[0], placeholder_value)
        return getattr(obj, self._attr)

    def describe(self, name: str) -> str:
        return f'{_describe(self._operands[0], name)}.{self._attr}'


#################### Placeholder ####################
class _PlaceholderMeta(type):
    """Lets operators act on the placeholder class itself, so `X` is used
    without instantiating it.
    """
    __getattr__ = _OperatorAbsorber.__getattr__

_install_operators(_PlaceholderMeta)


class _Placeholder(metaclass=_PlaceholderMeta):
    """Leaf of every expression tree; stands for the validated argument."""

    def substitute(placeholder):
        # called on the class, so there is no self
        return placeholder

    def describe(name: str) -> str:
        return name


class X(_Placeholder):
    """The validated argument, as used in ``validate_expression(k=X >= 1)``.

    Supported: comparisons, ``&`` and ``|`` between comparisons, and
    attribute access (``X.a``, ``X.size``). Rejected with `ExpressionError`:
    ``len(X)``, ``v in X``, chained comparisons such as ``0 < X < 1`` and
    the keywords ``and``, ``or`` and ``not``. Arithmetic, calls and
    indexing are not supported.
    """


def is_placeholder(value) -> bool:
    """True only for `X` (or another placeholder class) itself."""
    return isinstance(value, type) and issubclass(value, _Placeholder)


def is_expression(value) -> bool:
    """True for placeholders and for any tree built from them.

    Args:
        value (Any): candidate expression.
    """
    return isinstance(value, _ExpressionNode) or is_placeholder(value)
