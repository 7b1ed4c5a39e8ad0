"""prgf-attack - prior-guided zeroth-order gradient estimation and black-box attacks"""

__version__ = '1.0.0'
