// Continuous Newton-Euler quadcopter model, rotor mixer and the discretized
// stepper x_{t+1} = f(x_t, u_t) + w_t.
#pragma once

#include "mirage/types.hpp"

#include <array>

namespace mirage {

/// Squared rotor angular velocities, rad^2/s^2.
struct RotorCommand {
    std::array<double, 4> w_sq{0.0, 0.0, 0.0, 0.0};

    double& operator[](int i) { return w_sq[static_cast<size_t>(i)]; }
    double operator[](int i) const { return w_sq[static_cast<size_t>(i)]; }
};

struct VehicleParams {
    double mass{1.5};            // kg
    double arm_length{0.25};     // m
    double thrust_coeff{1e-5};   // N s^2
    double drag_coeff{1e-7};     // N m s^2
    double inertia_xx{0.02};     // kg m^2
    double inertia_yy{0.02};
    double inertia_zz{0.04};
    double gravity{9.81};        // m/s^2
    double w_sq_max{4e6};        // actuator bound on each w^2
    double pitch_max{1.2};       // gimbal-safe envelope, rad

    Vec3 inertia_diag() const { return {inertia_xx, inertia_yy, inertia_zz}; }
    /// Per-rotor squared speed that balances gravity.
    double hover_w_sq() const { return mass * gravity / (4.0 * thrust_coeff); }
};

/// Collective thrust along body z plus body torques.
struct WrenchBody {
    double thrust{0.0};          // N, along body +z
    Vec3 torque{Vec3::Zero()};   // N m
};

/// Result of mapping a wrench back onto the four rotors; `saturated` is set
/// when any component was clamped to [0, w_sq_max].
struct MixResult {
    RotorCommand command;
    bool saturated{false};
};

/// Thrust/torque from squared rotor speeds:
///   F_z = b (u1+u2+u3+u4)
///   tx  = b l (-u2 + u4)
///   ty  = b l (-u1 + u3)
///   tz  = d (u1 - u2 + u3 - u4)
/// Rejects negative components.
WrenchBody mixer(const RotorCommand& u, const VehicleParams& p);

/// Inverse of the mixer with clamping to the feasible command set.
MixResult inverse_mixer(const WrenchBody& w, const VehicleParams& p);

/// Time derivative of the full state under the Newton-Euler equations.
/// Throws SimulationError when |pitch| exceeds the gimbal-safe envelope.
Vec12 continuous_derivative(const State12& x, const RotorCommand& u,
                            const VehicleParams& p);

/// One RK4 step of length dt plus the additive process-noise sample w.
State12 step(const State12& x, const RotorCommand& u, double dt,
             const Vec12& w, const VehicleParams& p);

/// Noiseless step, the f of the deviation recursion.
inline State12 step(const State12& x, const RotorCommand& u, double dt,
                    const VehicleParams& p) {
    return step(x, u, dt, Vec12::Zero(), p);
}

/// Rotor command holding the vehicle at hover (level attitude).
RotorCommand hover_command(const VehicleParams& p);

}  // namespace mirage
