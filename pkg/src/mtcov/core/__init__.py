"""Core functionality for mtcov.

Import from the submodules directly; ``config`` depends on ``models`` which in
turn depends on ``constants`` and ``exceptions`` here.
"""
