"""diffplace: macro placement via graph diffusion.

Synthetic netlist/placement generation, a graph denoising model trained with
a small built-in autodiff engine, potential-guided DDPM sampling, and exact
placement metrics (HPWL, legality, RUDY).
"""

__version__ = "0.1.0"
