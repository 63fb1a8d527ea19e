"""Closed-form fields of the nearly-incompressible manufactured solution.

Generated by scripts/generate_case_b.py; do not edit by hand.
"""

from numpy import cos, pi, sin


def displacement(x, y, z):
    t0 = 2*pi
    t1 = t0*x
    t2 = sin(t1)
    t3 = t2**2
    t4 = t0*y
    t5 = sin(t4)
    t6 = t5**2
    t7 = t0*z
    t8 = sin(t7)
    t9 = t8*cos(t7)
    t10 = cos(t4)
    t11 = t8**2
    t12 = cos(t1)
    return (t3*(t10*t11*t5 - t6*t9), t6*(-t11*t12*t2 + t3*t9), t11*(-t10*t3*t5 + t12*t2*t6),)


def displacement_gradient(x, y, z):
    t0 = 2*pi
    t1 = t0*y
    t2 = sin(t1)
    t3 = t2**2
    t4 = t0*z
    t5 = cos(t4)
    t6 = sin(t4)
    t7 = t5*t6
    t8 = cos(t1)
    t9 = t6**2
    t10 = t0*x
    t11 = cos(t10)
    t12 = sin(t10)
    t13 = t11*t12
    t14 = 4*pi
    t15 = t13*t14
    t16 = t12**2
    t17 = t8**2
    t18 = t0*t9
    t19 = t2*t8
    t20 = t14*t19
    t21 = t18*t3 + t20*t7
    t22 = t5**2
    t23 = t11**2
    t24 = t15*t7 + t16*t18
    t25 = t0*t16*t3 + t15*t19
    return (t15*(t2*t8*t9 - t3*t7), t16*(2*pi*t17*t9 - t21), t16*(-t0*t22*t3 + t21), t3*(-t18*t23 + t24), t20*(-t13*t9 + t16*t7), t3*(2*pi*t16*t22 - t24), t9*(2*pi*t23*t3 - t25), t9*(-t0*t16*t17 + t25), t14*t7*(t11*t12*t3 - t16*t19),)


def load(x, y, z, lam, mu):
    t0 = 2*pi
    t1 = t0*z
    t2 = sin(t1)
    t3 = t2**2
    t4 = t0*y
    t5 = cos(t4)
    t6 = sin(t4)
    t7 = pi**2
    t8 = t0*x
    t9 = sin(t8)
    t10 = t7*t9**2
    t11 = 32*t10
    t12 = t11*t3*t5*t6
    t13 = cos(t8)
    t14 = t13**2
    t15 = t3*t7
    t16 = 8*t5*t6
    t17 = t14*t15*t16
    t18 = cos(t1)
    t19 = t18**2
    t20 = t10*t16*t19
    t21 = t6**2
    t22 = t18*t2*t21
    t23 = 8*t7
    t24 = 8*t5**2
    t25 = -t10*t18*t2*t24 + t11*t22 - t14*t22*t23
    t26 = t13*t15*t9
    t27 = t13*t19*t21*t23*t9 - 32*t21*t26 + t24*t26
    return (mu*(t12 - t17 - t20 - t25), mu*(t25 + t27), mu*(-t12 + t17 + t20 - t27),)
