#pragma once

#include <string>
#include <utility>
#include <vector>

namespace percept {

// Sensor limits: ranges 20..5600 mm over a 240 degree arc at 0.36 degree steps.
constexpr double kLaserMinRangeMm = 20.0;
constexpr double kLaserMaxRangeMm = 5600.0;
constexpr double kLaserArcDeg = 240.0;
constexpr double kLaserStepDeg = 0.36;
constexpr int kLaserBeamCount = 667;

struct PolarSample {
    double rho_mm = 0.0;
    double alpha_rad = 0.0;
    bool valid = false;  // within [20, 5600] mm
};

// Samples ordered by strictly increasing angle within the 240 degree arc,
// angles measured from the sensor axis (arc spans -120..+120 degrees).
struct LaserScan {
    std::vector<PolarSample> samples;
};

// x = rho * cos(alpha), y = rho * sin(alpha). Invalid samples are rejected.
std::pair<double, double> polar_to_cartesian(const PolarSample& s);

// CSV lines `angle_deg,range_mm`; an optional header line is skipped. Ranges
// outside the sensor limits are kept but marked invalid. Throws DataError on
// unparseable lines or angles outside the arc.
LaserScan parse_scan(const std::string& path);
LaserScan parse_scan_text(const std::string& text, const std::string& origin = "<scan>");
void write_scan_csv(const LaserScan& scan, const std::string& path);

struct CamCell {
    int row = 0, col = 0;
};

// Grid index (floor(r*rows/H), floor(q*cols/W)); boundary pixels clamp to the
// last cell. Pixels outside the image are rejected.
CamCell pixel_to_camera_cell(int q, int r, int img_w, int img_h, int rows, int cols);

// Camera-grid cell -> laser angular band. Bands split the nominal arc into
// equal slices indexed by increasing angle; the mapping must cover every cell.
struct GridCalibration {
    int cam_rows = 3, cam_cols = 3;
    int laser_bands = 3;
    std::vector<int> cell_to_band;  // row-major camera cells, -1 = uncalibrated

    int band_for_cell(int row, int col) const;
    std::pair<double, double> band_limits_rad(int band) const;

    // Identity column mapping: camera column c (any row) -> band c.
    static GridCalibration default_calibration(int cam_rows = 3, int cam_cols = 3,
                                               int laser_bands = 3);
};

// Text format: `camera_grid R C`, `laser_bands N`, then `row col -> band`
// lines for every camera cell.
GridCalibration load_calibration(const std::string& path);

struct DistanceResult {
    bool has_return = false;
    int z_mm = 0;  // minimum valid range in the band, integer millimeters
    int band = 0;
};

// Pixel -> camera cell -> laser band -> nearest valid return in that band.
// has_return is false when the band holds no valid sample.
DistanceResult map_to_distance(int q, int r, int img_w, int img_h,
                               const GridCalibration& calib, const LaserScan& scan);

// World obstacles for the scan simulator, millimeters in the sensor frame
// (x forward, y left, angles counter-clockwise).
struct Obstacle {
    enum class Kind { Rect, Circle } kind = Kind::Rect;
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // rect
    double cx = 0, cy = 0, radius = 0;      // circle

    static Obstacle rect(double x1, double y1, double x2, double y2);
    static Obstacle circle(double cx, double cy, double radius);
    // Thin wall at x = x_mm spanning y in [y_lo, y_hi].
    static Obstacle wall(double x_mm, double y_lo = -6000, double y_hi = 6000);
};

struct SensorPose {
    double x_mm = 0, y_mm = 0, heading_rad = 0;
};

// Casts all 667 beams and keeps the nearest hit per beam; out-of-range hits
// and misses are marked invalid. Deterministic.
LaserScan simulate_scan(const std::vector<Obstacle>& scene, const SensorPose& pose = {});

}  // namespace percept
