"""Null distribution of the dual chi-square mixture statistic against chi2_1."""

from _common import main

if __name__ == "__main__":
    main("dualchi2-ecdf", __doc__)
