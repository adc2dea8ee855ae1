"""Fixed-step explicit integrators over tuples of arrays."""


def _axpy(y, k, h):
    return tuple(a + h * b for a, b in zip(y, k))


def euler_step(rhs, y, dt):
    return _axpy(y, rhs(y), dt)


def rk4_step(rhs, y, dt):
    """One classical fourth-order Runge-Kutta step; ``rhs`` maps a tuple of arrays to a tuple."""
    k1 = rhs(y)
    k2 = rhs(_axpy(y, k1, 0.5 * dt))
    k3 = rhs(_axpy(y, k2, 0.5 * dt))
    k4 = rhs(_axpy(y, k3, dt))
    return tuple(a + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


STEPPERS = {"rk4": rk4_step, "euler": euler_step}


def get_stepper(name):
    try:
        return STEPPERS[name]
    except KeyError:
        raise ValueError(f"unknown integrator {name!r}; expected one of {sorted(STEPPERS)}") from None
