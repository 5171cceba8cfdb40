"""Golden fixture generator: torch-evaluated test vectors for grid operators."""

from fixturegen.core import FixtureCase, build_cases, generate_fixtures
from fixturegen.formula import validate_against_formula

__all__ = ["FixtureCase", "build_cases", "generate_fixtures",
           "validate_against_formula"]
__version__ = "0.1.0"
