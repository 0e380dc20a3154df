"""Direct-transcription oracle for the torque-limited pendulum swing-up.

Decision variables are all states and controls; the semi-implicit Euler
dynamics enter as equality constraints and the torque limit as bounds.
A single-shooting L-BFGS-B solve is used as a cross-check. Prints the
optimal cost to be frozen in test_boxfddp.cpp.
"""
import numpy as np
from scipy.optimize import minimize

m, l, g, b = 1.0, 1.0, 9.81, 0.1
dt, N = 0.1, 20
u_max = 7.0
w_th, w_om, w_u = 1.0, 0.1, 0.01
w_T = 100.0


def step(x, u):
    th, om = x
    om1 = om + dt * (u - b * om - m * g * l * np.sin(th)) / (m * l * l)
    return np.array([th + dt * om1, om1])


def running_cost(x, u):
    return dt * (w_th * (x[0] - np.pi) ** 2 + w_om * x[1] ** 2 + w_u * u ** 2)


def terminal_cost(x):
    return w_T * ((x[0] - np.pi) ** 2 + 0.1 * x[1] ** 2)


x0 = np.array([0.0, 0.0])


def unpack(z):
    xs = np.vstack([x0, z[: 2 * N].reshape(N, 2)])
    us = z[2 * N:]
    return xs, us


def total(z):
    xs, us = unpack(z)
    return sum(running_cost(xs[k], us[k]) for k in range(N)) + terminal_cost(xs[N])


def defects(z):
    xs, us = unpack(z)
    return np.concatenate([step(xs[k], us[k]) - xs[k + 1] for k in range(N)])


def shooting(us):
    x, c = x0.copy(), 0.0
    for k in range(N):
        c += running_cost(x, us[k])
        x = step(x, us[k])
    return c + terminal_cost(x)


def main():
    # single shooting from zero controls, then transcription refined from it
    ss = minimize(shooting, np.zeros(N), method="L-BFGS-B", bounds=[(-u_max, u_max)] * N,
                  options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 20000})
    xs = [x0]
    for k in range(N):
        xs.append(step(xs[-1], ss.x[k]))
    z0 = np.concatenate([np.array(xs[1:]).ravel(), ss.x])
    bounds = [(None, None)] * (2 * N) + [(-u_max, u_max)] * N
    dt_sol = minimize(total, z0, method="SLSQP", bounds=bounds,
                      constraints={"type": "eq", "fun": defects},
                      options={"ftol": 1e-15, "maxiter": 2000})
    print("shooting cost      %.12f" % ss.fun)
    print("transcription cost %.12f (max defect %.1e)" % (dt_sol.fun, np.abs(defects(dt_sol.x)).max()))
    _, us = unpack(dt_sol.x)
    print("saturated nodes    %d" % int(np.sum(np.abs(np.abs(us) - u_max) < 1e-6)))
    print("controls", np.array2string(us, precision=4))


if __name__ == "__main__":
    main()
