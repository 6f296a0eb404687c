"""dzlab: dilemma-zone approach simulation, episode collection, and
stop-or-go decision predictors."""

__version__ = "0.1.0"
