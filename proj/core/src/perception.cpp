#include "mirage/perception.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace mirage {

namespace {

constexpr std::uint8_t kBrightThreshold = 127;
constexpr double kMinSidePx = 4.0;

// Union-find over row runs for connected-component labeling.
struct RunSet {
    std::vector<int> parent;

    int make() {
        parent.push_back(static_cast<int>(parent.size()));
        return parent.back();
    }
    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[b] = a;
    }
};

struct ComponentStats {
    double weight{0.0};
    double wx{0.0};
    double wy{0.0};
    int min_row{INT_MAX};
    int max_row{-1};
    int min_col{INT_MAX};
    int max_col{-1};
};

}  // namespace

std::optional<Vec2> project(const Vec3& p_cam, const CameraModel& cam) {
    if (p_cam.z() <= 0.0) return std::nullopt;
    return Vec2{cam.focal_px * p_cam.x() / p_cam.z(),
                cam.focal_px * p_cam.y() / p_cam.z()};
}

Vec3 marker_in_camera(const State12& x, const Vec3& marker_earth,
                      const CameraModel& cam) {
    const Vec3 camera_center =
        x.position + euler_to_rotation(x.attitude) * cam.mount.offset;
    return earth_to_camera(x, cam.mount) * (marker_earth - camera_center);
}

Frame render_marker(const MarkerObservation& obs, const CameraModel& cam,
                    std::uint64_t step) {
    Frame f = Frame::blank(cam, step);
    if (!obs.visible || obs.side_px <= 0.0) return f;

    // Square bounds in pixel coordinates (origin at the top-left corner;
    // the image-center origin of the observation sits at (w/2, h/2)).
    const double x_lo = obs.center.x() - obs.side_px / 2.0 + cam.half_width();
    const double x_hi = obs.center.x() + obs.side_px / 2.0 + cam.half_width();
    const double y_lo = obs.center.y() - obs.side_px / 2.0 + cam.half_height();
    const double y_hi = obs.center.y() + obs.side_px / 2.0 + cam.half_height();

    const int col_first = std::max(0, static_cast<int>(std::floor(x_lo)));
    const int col_last =
        std::min(cam.width - 1, static_cast<int>(std::ceil(x_hi)) - 1);
    const int row_first = std::max(0, static_cast<int>(std::floor(y_lo)));
    const int row_last =
        std::min(cam.height - 1, static_cast<int>(std::ceil(y_hi)) - 1);

    for (int r = row_first; r <= row_last; ++r) {
        const double cov_y = std::clamp(y_hi, static_cast<double>(r),
                                        static_cast<double>(r) + 1.0) -
                             std::clamp(y_lo, static_cast<double>(r),
                                        static_cast<double>(r) + 1.0);
        if (cov_y <= 0.0) continue;
        std::uint8_t* row = f.data.data() + static_cast<size_t>(r) * f.width;
        for (int c = col_first; c <= col_last; ++c) {
            const double cov_x = std::clamp(x_hi, static_cast<double>(c),
                                            static_cast<double>(c) + 1.0) -
                                 std::clamp(x_lo, static_cast<double>(c),
                                            static_cast<double>(c) + 1.0);
            if (cov_x <= 0.0) continue;
            row[c] = static_cast<std::uint8_t>(
                std::lround(255.0 * cov_x * cov_y));
        }
    }
    return f;
}

MarkerObservation detect_marker(const Frame& frame) {
    MarkerObservation none;
    if (frame.width <= 0 || frame.height <= 0) return none;

    struct Run {
        int row, col_begin, col_end;  // [begin, end)
        int id;
    };

    RunSet sets;
    std::vector<Run> prev_runs, cur_runs;
    std::vector<ComponentStats> stats;

    const int w = frame.width;
    for (int r = 0; r < frame.height; ++r) {
        cur_runs.clear();
        const std::uint8_t* row = frame.data.data() + static_cast<size_t>(r) * w;
        int c = 0;
        while (c < w) {
            // Skip dark spans eight bytes at a time; background is mostly 0.
            if (row[c] <= kBrightThreshold) {
                if ((c & 7) == 0) {
                    while (c + 8 <= w) {
                        std::uint64_t block;
                        std::memcpy(&block, row + c, 8);
                        if (block != 0) break;
                        c += 8;
                    }
                }
                while (c < w && row[c] <= kBrightThreshold) ++c;
                continue;
            }
            const int begin = c;
            while (c < w && row[c] > kBrightThreshold) ++c;
            const int id = sets.make();
            stats.emplace_back();
            Run run{r, begin, c, id};
            // 4-connectivity with overlapping runs in the previous row.
            for (const Run& p : prev_runs) {
                if (p.col_end > run.col_begin && p.col_begin < run.col_end) {
                    sets.unite(p.id, run.id);
                }
            }
            // Accumulate intensity-weighted moments; pixel centers at +0.5.
            ComponentStats& s = stats[static_cast<size_t>(id)];
            for (int cc = begin; cc < run.col_end; ++cc) {
                const double wgt = row[cc] / 255.0;
                s.weight += wgt;
                s.wx += wgt * (cc + 0.5);
                s.wy += wgt * (r + 0.5);
            }
            s.min_row = std::min(s.min_row, r);
            s.max_row = std::max(s.max_row, r);
            s.min_col = std::min(s.min_col, begin);
            s.max_col = std::max(s.max_col, run.col_end - 1);
            cur_runs.push_back(run);
        }
        std::swap(prev_runs, cur_runs);
    }

    if (stats.empty()) return none;

    // Merge run stats into their component roots.
    std::vector<ComponentStats> merged(stats.size());
    for (size_t i = 0; i < stats.size(); ++i) {
        ComponentStats& root = merged[static_cast<size_t>(
            sets.find(static_cast<int>(i)))];
        root.weight += stats[i].weight;
        root.wx += stats[i].wx;
        root.wy += stats[i].wy;
        root.min_row = std::min(root.min_row, stats[i].min_row);
        root.max_row = std::max(root.max_row, stats[i].max_row);
        root.min_col = std::min(root.min_col, stats[i].min_col);
        root.max_col = std::max(root.max_col, stats[i].max_col);
    }

    // Largest effective area; ties resolve to smaller center x, then y.
    int best = -1;
    double best_cx = 0.0, best_cy = 0.0;
    for (size_t i = 0; i < merged.size(); ++i) {
        if (merged[i].weight <= 0.0) continue;
        const double cx = merged[i].wx / merged[i].weight;
        const double cy = merged[i].wy / merged[i].weight;
        if (best < 0 || merged[i].weight > merged[static_cast<size_t>(best)].weight ||
            (merged[i].weight == merged[static_cast<size_t>(best)].weight &&
             (cx < best_cx || (cx == best_cx && cy < best_cy)))) {
            best = static_cast<int>(i);
            best_cx = cx;
            best_cy = cy;
        }
    }
    if (best < 0) return none;

    const ComponentStats& top = merged[static_cast<size_t>(best)];
    MarkerObservation obs;
    obs.center = Vec2{best_cx - frame.width / 2.0, best_cy - frame.height / 2.0};
    obs.side_px = std::sqrt(top.weight);
    // Components touching the border are clipped squares: their centroid is
    // biased inward, so they count as not visible.
    const bool clipped = top.min_row == 0 || top.min_col == 0 ||
                         top.max_row == frame.height - 1 ||
                         top.max_col == frame.width - 1;
    obs.visible = !clipped && obs.side_px > kMinSidePx &&
                  std::abs(obs.center.x()) <= frame.width / 2.0 &&
                  std::abs(obs.center.y()) <= frame.height / 2.0;
    if (!obs.visible) return none;
    return obs;
}

Vec3 estimate_relative_position(const MarkerObservation& obs,
                                const CameraModel& cam, double marker_side_m) {
    if (!obs.visible || obs.side_px <= 0.0) {
        throw SimulationError("estimate_relative_position: marker not visible");
    }
    const double z = cam.focal_px * marker_side_m / obs.side_px;
    return Vec3{obs.center.x() * z / cam.focal_px,
                obs.center.y() * z / cam.focal_px, z};
}

bool observation_in_view(const MarkerObservation& obs, const CameraModel& cam) {
    return obs.visible && obs.side_px > kMinSidePx &&
           std::abs(obs.center.x()) < cam.half_width() &&
           std::abs(obs.center.y()) < cam.half_height();
}

void write_pgm(const Frame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path);
    out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(frame.data.data()),
              static_cast<std::streamsize>(frame.data.size()));
    if (!out) throw IoError("write_pgm: write failed for " + path);
}

}  // namespace mirage
