# -*- coding: utf-8 -*-
"""msde - minimum S-divergence estimation for discrete models.

"""

__version__ = '0.3.0'

name = "msde"
