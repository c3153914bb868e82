"""Exception types shared across the package.

``InputError`` covers malformed or inconsistent inputs (bad files, shape
mismatches, negative entries where nonnegative ones are required).
``DomainError`` covers parameters outside the range where a bound is
defined; its message always names the violated boundary.
"""


class InputError(ValueError):
    pass


class DomainError(ValueError):
    pass
