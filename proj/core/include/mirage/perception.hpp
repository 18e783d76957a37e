// Camera channel: marker geometry -> pinhole projection -> synthetic frame ->
// detection -> relative position estimate.
#pragma once

#include "mirage/frames.hpp"
#include "mirage/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mirage {

struct CameraModel {
    double focal_px{800.0};
    int width{1280};
    int height{720};
    CameraMount mount{CameraMount::down_facing()};

    double half_width() const { return width / 2.0; }
    double half_height() const { return height / 2.0; }
};

/// Detected marker: center in pixels with image-center origin, side length
/// in pixels. `visible` is a value, not an error.
struct MarkerObservation {
    Vec2 center{Vec2::Zero()};
    double side_px{0.0};
    bool visible{false};
};

/// Grayscale 8-bit frame; pixel (row, col) at data[row * width + col].
struct Frame {
    int width{0};
    int height{0};
    std::vector<std::uint8_t> data;
    std::uint64_t step{0};

    static Frame blank(const CameraModel& cam, std::uint64_t step = 0) {
        Frame f;
        f.width = cam.width;
        f.height = cam.height;
        f.data.assign(static_cast<size_t>(cam.width) * cam.height, 0);
        f.step = step;
        return f;
    }
};

/// Physical marker: square side length and earth-frame center.
struct MarkerGeometry {
    double side_m{0.5};
    Vec3 center_earth{Vec3::Zero()};
};

/// Pinhole projection s = (f/Z) (X, Y). Empty when the point is not in
/// front of the camera (Z <= 0).
std::optional<Vec2> project(const Vec3& p_cam, const CameraModel& cam);

/// Marker center in the camera frame: R_ec(x) (P_earth - p - R_be * offset).
Vec3 marker_in_camera(const State12& x, const Vec3& marker_earth,
                      const CameraModel& cam);

/// Renders an axis-aligned bright square (anti-aliased edges) on a dark
/// background, clipped at the image borders.
Frame render_marker(const MarkerObservation& obs, const CameraModel& cam,
                    std::uint64_t step = 0);

/// Threshold -> largest connected bright component -> weighted centroid and
/// effective side (sqrt of accumulated coverage). Ties on area resolve to the
/// component with the smaller center x, then smaller center y.
MarkerObservation detect_marker(const Frame& frame);

/// Inverts the pinhole model using the known physical side length:
/// Z = f l / side, X = cx Z / f, Y = cy Z / f. Rejects invisible input.
Vec3 estimate_relative_position(const MarkerObservation& obs,
                                const CameraModel& cam, double marker_side_m);

/// True when the projected center lies inside the image and the projected
/// side is above the detectability floor.
bool observation_in_view(const MarkerObservation& obs, const CameraModel& cam);

/// Binary PGM (P5) export for inspection.
void write_pgm(const Frame& frame, const std::string& path);

}  // namespace mirage
