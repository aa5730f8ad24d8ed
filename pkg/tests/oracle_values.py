"""Reference values from scripts/derive_oracles.py (sympy); regenerate rather than edit."""

# schwarzschild, m = 1, at (t, r, th, ph) = (0, 4, pi/2, 0)
SCHW_CHRISTOFFEL = {'001': 0.125, '100': 0.03125, '111': -0.125, '122': -2.0, '133': -2.0, '212': 0.25, '313': 0.25}
SCHW_RIEMANN = {(0, 1, 0, 1): 0.0625, (0, 2, 0, 2): -0.25, (1, 2, 1, 2): -0.25, (2, 3, 2, 3): 0.5}
SCHW_RICCI_MAX = 0.0

# unit round sphere, stereographic chart
SPHERE2_R_ORIGIN = 2.0
SPHERE3_R = 6.0

# beltrami pullback, A = diag(2,1,1,1,1), dim 4, at x0
BELTRAMI_X0 = (0.1, -0.2, 0.3, 0.05)
BELTRAMI_GBAR = [[10.24923527390401, 0.26522301516137226, -0.3978345227420584, -0.06630575379034306], [0.26522301516137226, 2.815865565153105, -0.014176731322656868, -0.002362788553776145], [-0.3978345227420584, -0.014176731322656868, 2.8276795079219856, 0.003544182830664217], [-0.06630575379034306, -0.002362788553776145, 0.003544182830664217, 2.807005108076444]]
BELTRAMI_PHI = 0.09465492844272197
BELTRAMI_DPHI = [-0.8271860419110473, -0.029476562740705474, 0.04421484411105821, 0.0073691406851763685]
BELTRAMI_LAMBDA = 2.159363554187443
BELTRAMI_LAMBDA_I = [0.2979552049229271, 0.010617557413734595, -0.015926336120601892, -0.0026543893534336487]
