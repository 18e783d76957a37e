#include "mirage/dynamics.hpp"

#include "mirage/frames.hpp"

#include <cmath>

namespace mirage {

WrenchBody mixer(const RotorCommand& u, const VehicleParams& p) {
    for (int i = 0; i < 4; ++i) {
        if (u[i] < 0.0) {
            throw SimulationError("mixer: negative squared rotor speed");
        }
    }
    const double b = p.thrust_coeff, d = p.drag_coeff, l = p.arm_length;
    WrenchBody w;
    w.thrust = b * (u[0] + u[1] + u[2] + u[3]);
    w.torque.x() = b * l * (-u[1] + u[3]);
    w.torque.y() = b * l * (-u[0] + u[2]);
    w.torque.z() = d * (u[0] - u[1] + u[2] - u[3]);
    return w;
}

MixResult inverse_mixer(const WrenchBody& w, const VehicleParams& p) {
    const double b = p.thrust_coeff, d = p.drag_coeff, l = p.arm_length;
    const double f4 = w.thrust / (4.0 * b);
    const double tx = w.torque.x() / (2.0 * b * l);
    const double ty = w.torque.y() / (2.0 * b * l);
    const double tz = w.torque.z() / (4.0 * d);

    MixResult r;
    r.command[0] = f4 - ty + tz;
    r.command[1] = f4 - tx - tz;
    r.command[2] = f4 + ty + tz;
    r.command[3] = f4 + tx - tz;
    for (int i = 0; i < 4; ++i) {
        if (r.command[i] < 0.0 || r.command[i] > p.w_sq_max) {
            r.command[i] = std::clamp(r.command[i], 0.0, p.w_sq_max);
            r.saturated = true;
        }
    }
    return r;
}

Vec12 continuous_derivative(const State12& x, const RotorCommand& u,
                            const VehicleParams& p) {
    if (std::abs(x.attitude.pitch) > p.pitch_max) {
        throw SimulationError("gimbal proximity: |pitch| exceeds envelope");
    }
    const WrenchBody wb = mixer(u, p);
    const Mat3 rot = euler_to_rotation(x.attitude);

    const Vec3 accel =
        rot * Vec3{0.0, 0.0, wb.thrust} / p.mass - Vec3{0.0, 0.0, p.gravity};

    // Body rates to Euler-angle rates.
    const double cr = std::cos(x.attitude.roll), sr = std::sin(x.attitude.roll);
    const double cp = std::cos(x.attitude.pitch), tp = std::tan(x.attitude.pitch);
    const Vec3& om = x.body_rates;
    Vec3 euler_rates;
    euler_rates.x() = om.x() + sr * tp * om.y() + cr * tp * om.z();
    euler_rates.y() = cr * om.y() - sr * om.z();
    euler_rates.z() = (sr * om.y() + cr * om.z()) / cp;

    const Vec3 inertia = p.inertia_diag();
    const Vec3 ang_momentum = inertia.cwiseProduct(om);
    const Vec3 omega_dot =
        (wb.torque - om.cross(ang_momentum)).cwiseQuotient(inertia);

    Vec12 dx;
    dx << x.velocity, accel, euler_rates, omega_dot;
    return dx;
}

State12 step(const State12& x, const RotorCommand& u, double dt, const Vec12& w,
             const VehicleParams& p) {
    if (dt <= 0.0) {
        throw SimulationError("step: dt must be positive");
    }
    const Vec12 x0 = x.to_vector();
    const auto deriv = [&](const Vec12& v) {
        return continuous_derivative(State12::from_vector(v), u, p);
    };
    const Vec12 k1 = deriv(x0);
    const Vec12 k2 = deriv(x0 + 0.5 * dt * k1);
    const Vec12 k3 = deriv(x0 + 0.5 * dt * k2);
    const Vec12 k4 = deriv(x0 + dt * k3);
    const Vec12 x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) + w;
    return State12::from_vector(x1);
}

RotorCommand hover_command(const VehicleParams& p) {
    RotorCommand u;
    u.w_sq.fill(p.hover_w_sq());
    return u;
}

}  // namespace mirage
