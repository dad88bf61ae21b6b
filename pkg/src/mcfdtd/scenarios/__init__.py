"""Ready-made simulation setups."""
