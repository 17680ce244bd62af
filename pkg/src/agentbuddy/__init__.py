"""AgentBuddy: a human-in-the-loop contextual-bandit router for agent-facing
answer suggestions.

A bandit policy picks one answer provider ("arm") per incoming question,
learns online from 1-5 star agent ratings, and asks candidate-eliminating
clarifying questions when the query is ambiguous.  Ships with a synthetic
simulator, off-policy evaluation over logged interactions, a REST service,
and a CLI.
"""

__version__ = "0.1.0"
