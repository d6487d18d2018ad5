"""thermo_run - Thermodynamic formalism engine for shifts of finite type and self-affine carpets"""

__version__ = "0.1.0"
