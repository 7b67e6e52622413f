#include "radcam/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "radcam/error.hpp"

namespace radcam {

namespace {

using json = nlohmann::json;

struct CsvRow {
  std::size_t line = 0;
  std::vector<double> values;
};

struct CsvTable {
  std::string header;
  std::vector<CsvRow> rows;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

double parse_field(std::string_view field, const std::filesystem::path& path, std::size_t line) {
  const std::string text = trim(field);
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line) +
                                       ": cannot parse '" + text + "' as a number");
  }
  return value;
}

// Reads a CSV whose header must equal one of `headers`; every row must have as
// many fields as the header it matched.
CsvTable read_csv(const std::filesystem::path& path, std::span<const std::string_view> headers) {
  std::ifstream in = open_for_read(path);
  CsvTable table;
  std::string raw;
  std::size_t line = 0;
  if (!std::getline(in, raw)) {
    throw Error(ErrorCode::kSchema, path.string() + ": missing header row");
  }
  ++line;
  table.header = trim(raw);
  bool known = false;
  for (auto h : headers) known = known || table.header == h;
  if (!known) {
    throw Error(ErrorCode::kSchema, path.string() + ": unexpected header '" + table.header +
                                        "', expected '" + std::string(headers.front()) + "'");
  }
  const auto columns = static_cast<std::size_t>(
      std::count(table.header.begin(), table.header.end(), ',') + 1);

  while (std::getline(in, raw)) {
    ++line;
    if (trim(raw).empty()) continue;
    CsvRow row;
    row.line = line;
    std::string_view rest(raw);
    while (true) {
      const auto comma = rest.find(',');
      row.values.push_back(parse_field(rest.substr(0, comma), path, line));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (row.values.size() != columns) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line) + ": expected " +
                                         std::to_string(columns) + " fields, got " +
                                         std::to_string(row.values.size()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

[[noreturn]] void invalid_row(const std::filesystem::path& path, std::size_t line,
                              const std::string& what) {
  throw Error(ErrorCode::kValidation, path.string() + ":" + std::to_string(line) + ": " + what);
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

template <typename T>
T required(const json& doc, const char* key, const std::filesystem::path& path) {
  if (!doc.contains(key)) {
    throw Error(ErrorCode::kSchema, path.string() + ": missing key '" + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, path.string() + ": key '" + key + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out = open_for_write(path);
  out << doc.dump(2) << '\n';
  finish_write(out, path);
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  std::string s(buf);
  if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
  return s;
}

std::vector<RadarDetection> read_radar_csv(const std::filesystem::path& path) {
  static constexpr std::string_view kHeaders[] = {
      "timestamp_s,x_m,y_m,z_m,velocity_mps",
      "timestamp_s,x_m,y_m,z_m,velocity_mps,range_m",
  };
  const CsvTable table = read_csv(path, kHeaders);
  std::vector<RadarDetection> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto& v = row.values;
    RadarDetection d = RadarDetection::at(v[0], Point3(v[1], v[2], v[3]), v[4]);
    if (v.size() == 6) {
      if (v[5] < 0.0) invalid_row(path, row.line, "negative range");
      if (std::abs(v[5] - d.range) > 1e-6) {
        invalid_row(path, row.line, "range disagrees with the x, y, z position");
      }
      d.range = v[5];
    }
    out.push_back(d);
  }
  return out;
}

void write_radar_csv(const std::filesystem::path& path, std::span<const RadarDetection> rows) {
  std::ofstream out = open_for_write(path);
  out << "timestamp_s,x_m,y_m,z_m,velocity_mps,range_m\n";
  for (const auto& d : rows) {
    out << format_double(d.timestamp) << ',' << format_double(d.position.x()) << ','
        << format_double(d.position.y()) << ',' << format_double(d.position.z()) << ','
        << format_double(d.velocity) << ',' << format_double(d.range) << '\n';
  }
  finish_write(out, path);
}

std::vector<ImageAnnotation> read_annotations_csv(const std::filesystem::path& path) {
  static constexpr std::string_view kHeaders[] = {"local_ts_s,u_px,v_px"};
  const CsvTable table = read_csv(path, kHeaders);
  std::vector<ImageAnnotation> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto& v = row.values;
    if (v[1] < 0.0 || v[2] < 0.0) invalid_row(path, row.line, "pixel coordinates must be >= 0");
    out.push_back({v[0], Point2(v[1], v[2])});
  }
  return out;
}

void write_annotations_csv(const std::filesystem::path& path,
                           std::span<const ImageAnnotation> rows) {
  std::ofstream out = open_for_write(path);
  out << "local_ts_s,u_px,v_px\n";
  for (const auto& a : rows) {
    out << format_double(a.local_timestamp) << ',' << format_double(a.pixel.x()) << ','
        << format_double(a.pixel.y()) << '\n';
  }
  finish_write(out, path);
}

std::vector<BBox> read_bboxes_csv(const std::filesystem::path& path) {
  static constexpr std::string_view kHeaders[] = {"timestamp_s,min_u,min_v,max_u,max_v"};
  const CsvTable table = read_csv(path, kHeaders);
  std::vector<BBox> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto& v = row.values;
    const BBox box{v[0], v[1], v[2], v[3], v[4]};
    if (!(box.min_u <= box.max_u) || !(box.min_v <= box.max_v)) {
      invalid_row(path, row.line, "bounding box min exceeds max");
    }
    out.push_back(box);
  }
  return out;
}

void write_bboxes_csv(const std::filesystem::path& path, std::span<const BBox> rows) {
  std::ofstream out = open_for_write(path);
  out << "timestamp_s,min_u,min_v,max_u,max_v\n";
  for (const auto& b : rows) {
    out << format_double(b.timestamp) << ',' << format_double(b.min_u) << ','
        << format_double(b.min_v) << ',' << format_double(b.max_u) << ','
        << format_double(b.max_v) << '\n';
  }
  finish_write(out, path);
}

std::vector<TimedPoint> read_projected_csv(const std::filesystem::path& path) {
  static constexpr std::string_view kHeaders[] = {"timestamp_s,u_px,v_px"};
  const CsvTable table = read_csv(path, kHeaders);
  std::vector<TimedPoint> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    out.push_back({row.values[0], Point2(row.values[1], row.values[2])});
  }
  return out;
}

void write_projected_csv(const std::filesystem::path& path, std::span<const TimedPoint> rows) {
  std::ofstream out = open_for_write(path);
  out << "timestamp_s,u_px,v_px\n";
  for (const auto& p : rows) {
    out << format_double(p.timestamp) << ',' << format_double(p.pixel.x()) << ','
        << format_double(p.pixel.y()) << '\n';
  }
  finish_write(out, path);
}

CameraModel read_intrinsics_json(const std::filesystem::path& path) {
  const json doc = load_json(path);
  CameraModel cam;
  cam.fx = required<double>(doc, "fx", path);
  cam.fy = required<double>(doc, "fy", path);
  cam.cx = required<double>(doc, "cx", path);
  cam.cy = required<double>(doc, "cy", path);
  if (doc.contains("skew")) cam.skew = required<double>(doc, "skew", path);
  if (doc.contains("dist")) {
    const auto dist = required<std::vector<double>>(doc, "dist", path);
    if (dist.size() != cam.dist.size()) {
      throw Error(ErrorCode::kSchema, path.string() + ": 'dist' must hold 5 coefficients");
    }
    std::copy(dist.begin(), dist.end(), cam.dist.begin());
  }
  cam.validate();
  return cam;
}

void write_intrinsics_json(const std::filesystem::path& path, const CameraModel& cam) {
  json doc;
  doc["fx"] = cam.fx;
  doc["fy"] = cam.fy;
  doc["cx"] = cam.cx;
  doc["cy"] = cam.cy;
  doc["skew"] = cam.skew;
  doc["dist"] = std::vector<double>(cam.dist.begin(), cam.dist.end());
  write_json(path, doc);
}

CalibrationFile read_calibration_json(const std::filesystem::path& path) {
  const json doc = load_json(path);
  CalibrationFile f;
  const auto rot = required<std::vector<double>>(doc, "rotation", path);
  const auto trans = required<std::vector<double>>(doc, "translation", path);
  const auto euler = required<std::vector<double>>(doc, "euler_xyz", path);
  if (rot.size() != 9 || trans.size() != 3 || euler.size() != 3) {
    throw Error(ErrorCode::kSchema,
                path.string() + ": rotation/translation/euler_xyz need 9/3/3 values");
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) f.pose.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
    f.pose.translation(r) = trans[static_cast<std::size_t>(r)];
  }
  if (!is_rotation(f.pose.rotation, 1e-9)) {
    throw Error(ErrorCode::kValidation, path.string() + ": rotation is not orthonormal");
  }
  if (!f.pose.translation.allFinite()) {
    throw Error(ErrorCode::kValidation, path.string() + ": translation is not finite");
  }
  f.euler = {euler[0], euler[1], euler[2]};
  f.rmse = required<double>(doc, "rmse", path);
  f.aed = required<double>(doc, "aed", path);
  f.cdsd = required<double>(doc, "cdsd", path);
  f.inlier_count = required<std::size_t>(doc, "inlier_count", path);
  f.solver_chosen = required<std::string>(doc, "solver_chosen", path);
  f.version = required<std::string>(doc, "version", path);
  f.seed = required<std::uint64_t>(doc, "seed", path);
  return f;
}

void write_calibration_json(const std::filesystem::path& path, const CalibrationFile& f) {
  json doc;
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(f.pose.rotation(r, c));
  }
  doc["rotation"] = rot;
  doc["translation"] = {f.pose.translation.x(), f.pose.translation.y(), f.pose.translation.z()};
  doc["euler_xyz"] = {f.euler.psi, f.euler.theta, f.euler.phi};
  doc["rmse"] = f.rmse;
  doc["aed"] = f.aed;
  doc["cdsd"] = f.cdsd;
  doc["inlier_count"] = f.inlier_count;
  doc["solver_chosen"] = f.solver_chosen;
  doc["version"] = f.version;
  doc["seed"] = f.seed;
  write_json(path, doc);
}

double read_start_timestamp(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_field(ss.str(), path, 1);
}

void write_start_timestamp(const std::filesystem::path& path, double start_timestamp) {
  std::ofstream out = open_for_write(path);
  out << format_double(start_timestamp) << '\n';
  finish_write(out, path);
}

}  // namespace radcam
