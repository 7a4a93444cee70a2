"""swimcorpus: staged synthesis of a validated swim-coaching QA corpus.

Four stages connected by file handoffs: knowledge-base ingestion,
performance-anchor identification, persona-matrix triplet generation,
and rule-based soundness validation with a bounded regeneration loop
and a human review gate.
"""

__version__ = "0.1.0"
