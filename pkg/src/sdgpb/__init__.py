"""SDG-PB interaction mining: corpus ingestion, five-stage LLM
classification pipeline, aggregation, and figure reporting."""

__version__ = "0.1.0"
