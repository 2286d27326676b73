"""Model, simulator and analytic companions of the grand-canonical Kac model."""
