"""laxforge: Lax-pair hierarchies, quasi-integrable and non-holonomic deformations."""
__version__ = "0.3.0"
