"""Event-guided, illumination-aware feature fusion at desk scale."""

__version__ = "0.1.0"
