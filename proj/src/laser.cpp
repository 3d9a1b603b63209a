#include "percept/laser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "percept/error.hpp"

namespace percept {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kArcHalfRad = (kLaserArcDeg / 2.0) * kPi / 180.0;

bool parse_double(const std::string& s, double& out) {
    try {
        size_t pos = 0;
        out = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

std::pair<double, double> polar_to_cartesian(const PolarSample& s) {
    if (!s.valid) throw std::invalid_argument("polar_to_cartesian: invalid sample");
    return {s.rho_mm * std::cos(s.alpha_rad), s.rho_mm * std::sin(s.alpha_rad)};
}

LaserScan parse_scan_text(const std::string& text, const std::string& origin) {
    LaserScan scan;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '#') continue;
        // optional header: a first line that does not start numerically
        if (lineno == 1 && std::string("0123456789+-.").find(trimmed[0]) == std::string::npos) {
            continue;
        }
        size_t comma = trimmed.find(',');
        double angle_deg, range_mm;
        if (comma == std::string::npos || !parse_double(trimmed.substr(0, comma), angle_deg) ||
            !parse_double(trimmed.substr(comma + 1), range_mm)) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": unparseable scan line '" +
                            line + "'");
        }
        if (std::abs(angle_deg) > kLaserArcDeg / 2.0 + 1e-9) {
            throw DataError(origin + ":" + std::to_string(lineno) +
                            ": angle outside the 240 degree arc");
        }
        PolarSample s;
        s.alpha_rad = angle_deg * kPi / 180.0;
        s.rho_mm = range_mm;
        s.valid = range_mm >= kLaserMinRangeMm && range_mm <= kLaserMaxRangeMm;
        scan.samples.push_back(s);
    }
    std::sort(scan.samples.begin(), scan.samples.end(),
              [](const PolarSample& a, const PolarSample& b) { return a.alpha_rad < b.alpha_rad; });
    for (size_t i = 1; i < scan.samples.size(); ++i) {
        if (scan.samples[i].alpha_rad <= scan.samples[i - 1].alpha_rad) {
            throw DataError(origin + ": duplicate scan angle");
        }
    }
    if (!scan.samples.empty() &&
        scan.samples.back().alpha_rad - scan.samples.front().alpha_rad >
            kLaserArcDeg * kPi / 180.0 + 1e-9) {
        throw DataError(origin + ": angle span exceeds the 240 degree arc");
    }
    return scan;
}

LaserScan parse_scan(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError(path + ": cannot open scan file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scan_text(buf.str(), path);
}

void write_scan_csv(const LaserScan& scan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << "angle_deg,range_mm\n";
    out.precision(10);
    for (const auto& s : scan.samples) {
        // no-return beams are written as range 0, below the sensor floor
        out << s.alpha_rad * 180.0 / kPi << "," << (s.valid ? s.rho_mm : 0.0) << "\n";
    }
}

CamCell pixel_to_camera_cell(int q, int r, int img_w, int img_h, int rows, int cols) {
    if (q < 0 || q >= img_w || r < 0 || r >= img_h) {
        throw std::invalid_argument("pixel_to_camera_cell: pixel outside the image");
    }
    if (rows < 1 || cols < 1) throw std::invalid_argument("pixel_to_camera_cell: bad grid");
    CamCell cell;
    cell.row = std::min(static_cast<int>(static_cast<int64_t>(r) * rows / img_h), rows - 1);
    cell.col = std::min(static_cast<int>(static_cast<int64_t>(q) * cols / img_w), cols - 1);
    return cell;
}

int GridCalibration::band_for_cell(int row, int col) const {
    if (row < 0 || row >= cam_rows || col < 0 || col >= cam_cols) {
        throw std::invalid_argument("calibration: camera cell out of range");
    }
    int band = cell_to_band[static_cast<size_t>(row) * cam_cols + col];
    if (band < 0 || band >= laser_bands) {
        throw DataError("calibration: camera cell (" + std::to_string(row) + "," +
                        std::to_string(col) + ") is uncalibrated");
    }
    return band;
}

std::pair<double, double> GridCalibration::band_limits_rad(int band) const {
    const double width = 2.0 * kArcHalfRad / laser_bands;
    return {-kArcHalfRad + band * width, -kArcHalfRad + (band + 1) * width};
}

GridCalibration GridCalibration::default_calibration(int cam_rows, int cam_cols,
                                                     int laser_bands) {
    GridCalibration c;
    c.cam_rows = cam_rows;
    c.cam_cols = cam_cols;
    c.laser_bands = laser_bands;
    c.cell_to_band.resize(static_cast<size_t>(cam_rows) * cam_cols);
    for (int r = 0; r < cam_rows; ++r) {
        for (int col = 0; col < cam_cols; ++col) {
            int band = cam_cols == 1 ? laser_bands / 2
                                     : col * laser_bands / cam_cols;
            c.cell_to_band[static_cast<size_t>(r) * cam_cols + col] =
                std::min(band, laser_bands - 1);
        }
    }
    return c;
}

GridCalibration load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path + ": cannot open calibration file");
    GridCalibration c;
    c.cam_rows = c.cam_cols = c.laser_bands = 0;
    std::string line;
    int lineno = 0;
    std::vector<std::tuple<int, int, int>> entries;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first) || first[0] == '#') continue;
        if (first == "camera_grid") {
            if (!(ls >> c.cam_rows >> c.cam_cols) || c.cam_rows < 1 || c.cam_cols < 1) {
                throw DataError(path + ":" + std::to_string(lineno) + ": bad camera_grid");
            }
        } else if (first == "laser_bands") {
            if (!(ls >> c.laser_bands) || c.laser_bands < 1) {
                throw DataError(path + ":" + std::to_string(lineno) + ": bad laser_bands");
            }
        } else {
            int row, col, band;
            std::string arrow;
            std::istringstream es(line);
            if (!(es >> row >> col >> arrow >> band) || arrow != "->") {
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": expected 'row col -> band'");
            }
            entries.emplace_back(row, col, band);
        }
    }
    if (c.cam_rows == 0 || c.laser_bands == 0) {
        throw DataError(path + ": missing camera_grid or laser_bands declaration");
    }
    c.cell_to_band.assign(static_cast<size_t>(c.cam_rows) * c.cam_cols, -1);
    for (auto [row, col, band] : entries) {
        if (row < 0 || row >= c.cam_rows || col < 0 || col >= c.cam_cols || band < 0 ||
            band >= c.laser_bands) {
            throw DataError(path + ": mapping entry out of range");
        }
        c.cell_to_band[static_cast<size_t>(row) * c.cam_cols + col] = band;
    }
    for (int v : c.cell_to_band) {
        if (v < 0) throw DataError(path + ": mapping does not cover every camera cell");
    }
    return c;
}

DistanceResult map_to_distance(int q, int r, int img_w, int img_h, const GridCalibration& calib,
                               const LaserScan& scan) {
    if (scan.samples.empty()) throw DataError("map_to_distance: empty scan");
    const CamCell cell = pixel_to_camera_cell(q, r, img_w, img_h, calib.cam_rows, calib.cam_cols);
    const int band = calib.band_for_cell(cell.row, cell.col);
    auto [lo, hi] = calib.band_limits_rad(band);
    const bool last = band == calib.laser_bands - 1;

    DistanceResult res;
    res.band = band;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : scan.samples) {
        if (!s.valid) continue;
        if (s.alpha_rad < lo) continue;
        if (last ? s.alpha_rad > hi : s.alpha_rad >= hi) continue;
        best = std::min(best, s.rho_mm);
    }
    if (std::isfinite(best)) {
        res.has_return = true;
        res.z_mm = static_cast<int>(std::llround(best));
    }
    return res;
}

Obstacle Obstacle::rect(double x1, double y1, double x2, double y2) {
    Obstacle o;
    o.kind = Kind::Rect;
    o.x1 = std::min(x1, x2);
    o.y1 = std::min(y1, y2);
    o.x2 = std::max(x1, x2);
    o.y2 = std::max(y1, y2);
    if (o.x1 == o.x2 || o.y1 == o.y2) {
        throw std::invalid_argument("obstacle rect must have positive extent");
    }
    return o;
}

Obstacle Obstacle::circle(double cx, double cy, double radius) {
    if (!(radius > 0)) throw std::invalid_argument("obstacle circle must have positive radius");
    Obstacle o;
    o.kind = Kind::Circle;
    o.cx = cx;
    o.cy = cy;
    o.radius = radius;
    return o;
}

Obstacle Obstacle::wall(double x_mm, double y_lo, double y_hi) {
    return rect(x_mm, y_lo, x_mm + 1.0, y_hi);
}

namespace {

// Nearest positive ray parameter for origin o, unit direction d. Returns
// infinity on a miss.
double ray_rect(double ox, double oy, double dx, double dy, const Obstacle& r) {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 2; ++axis) {
        const double o = axis == 0 ? ox : oy;
        const double d = axis == 0 ? dx : dy;
        const double lo = axis == 0 ? r.x1 : r.y1;
        const double hi = axis == 0 ? r.x2 : r.y2;
        if (d == 0.0) {
            if (o < lo || o > hi) return std::numeric_limits<double>::infinity();
        } else {
            double t1 = (lo - o) / d, t2 = (hi - o) / d;
            if (t1 > t2) std::swap(t1, t2);
            tmin = std::max(tmin, t1);
            tmax = std::min(tmax, t2);
            if (tmin > tmax) return std::numeric_limits<double>::infinity();
        }
    }
    return tmin > 0.0 ? tmin : std::numeric_limits<double>::infinity();
}

double ray_circle(double ox, double oy, double dx, double dy, const Obstacle& c) {
    const double fx = ox - c.cx, fy = oy - c.cy;
    const double b = fx * dx + fy * dy;
    const double q = fx * fx + fy * fy - c.radius * c.radius;
    const double disc = b * b - q;
    if (disc < 0.0) return std::numeric_limits<double>::infinity();
    const double root = std::sqrt(disc);
    double t = -b - root;
    if (t <= 0.0) t = -b + root;
    return t > 0.0 ? t : std::numeric_limits<double>::infinity();
}

}  // namespace

LaserScan simulate_scan(const std::vector<Obstacle>& scene, const SensorPose& pose) {
    LaserScan scan;
    scan.samples.resize(kLaserBeamCount);
    for (int i = 0; i < kLaserBeamCount; ++i) {
        const double alpha = (-kLaserArcDeg / 2.0 + i * kLaserStepDeg) * kPi / 180.0;
        const double theta = pose.heading_rad + alpha;
        const double dx = std::cos(theta), dy = std::sin(theta);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& ob : scene) {
            const double t = ob.kind == Obstacle::Kind::Rect
                                 ? ray_rect(pose.x_mm, pose.y_mm, dx, dy, ob)
                                 : ray_circle(pose.x_mm, pose.y_mm, dx, dy, ob);
            best = std::min(best, t);
        }
        PolarSample& s = scan.samples[i];
        s.alpha_rad = alpha;
        if (std::isfinite(best)) {
            s.rho_mm = best;
            s.valid = best >= kLaserMinRangeMm && best <= kLaserMaxRangeMm;
        } else {
            s.rho_mm = 0.0;
            s.valid = false;
        }
    }
    return scan;
}

}  // namespace percept
