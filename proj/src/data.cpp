#include "pointe/data.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pointe/rng.hpp"

namespace pointe {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

const char* shape_kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cube: return "cube";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::plane: return "plane";
  }
  return "unknown";
}

ShapeKind shape_kind_from_name(const std::string& s) {
  if (s == "sphere") return ShapeKind::sphere;
  if (s == "cube") return ShapeKind::cube;
  if (s == "cylinder") return ShapeKind::cylinder;
  if (s == "plane") return ShapeKind::plane;
  throw Error(ErrorCode::ConfigError, "unknown shape kind '" + s + "'");
}

int shape_part_count(ShapeKind k) {
  switch (k) {
    case ShapeKind::sphere: return 2;
    case ShapeKind::cube: return 6;
    case ShapeKind::cylinder: return 3;
    case ShapeKind::plane: return 2;
  }
  return 0;
}

PointCloud gen_shape(const ShapeSpec& spec) {
  if (spec.n_points < 8) throw Error(ErrorCode::ConfigError, "n_points must be >= 8");
  if (spec.noise_sigma < 0) throw Error(ErrorCode::ConfigError, "noise_sigma must be >= 0");
  Rng rng(spec.seed);
  PointCloud pc;
  pc.points = Matrix(spec.n_points, 3);
  pc.labels.resize(spec.n_points);

  for (int i = 0; i < spec.n_points; ++i) {
    double x = 0, y = 0, z = 0;
    int part = 0;
    switch (spec.kind) {
      case ShapeKind::sphere: {
        double norm = 0;
        do {
          x = rng.normal();
          y = rng.normal();
          z = rng.normal();
          norm = std::sqrt(x * x + y * y + z * z);
        } while (norm < 1e-12);
        x /= norm;
        y /= norm;
        z /= norm;
        part = z >= 0 ? 0 : 1;
        break;
      }
      case ShapeKind::cube: {
        const int face = rng.uniform_int(6);
        const double u = rng.uniform(-1.0, 1.0);
        const double v = rng.uniform(-1.0, 1.0);
        const int axis = face / 2;
        const double sign = (face % 2) ? -1.0 : 1.0;
        double p[3];
        p[axis] = sign;
        p[(axis + 1) % 3] = u;
        p[(axis + 2) % 3] = v;
        x = p[0];
        y = p[1];
        z = p[2];
        part = face;
        break;
      }
      case ShapeKind::cylinder: {
        // side area 4*pi, each cap pi: side with probability 2/3
        const double pick = rng.uniform();
        const double theta = kTwoPi * rng.uniform();
        if (pick < 2.0 / 3.0) {
          x = std::cos(theta);
          y = std::sin(theta);
          z = rng.uniform(-1.0, 1.0);
          part = 0;
        } else {
          const double r = std::sqrt(rng.uniform());
          x = r * std::cos(theta);
          y = r * std::sin(theta);
          const bool top = pick >= 5.0 / 6.0;
          z = top ? 1.0 : -1.0;
          part = top ? 2 : 1;
        }
        break;
      }
      case ShapeKind::plane: {
        x = rng.uniform(-1.0, 1.0);
        y = rng.uniform(-1.0, 1.0);
        z = 0.0;
        part = x >= 0 ? 0 : 1;
        break;
      }
    }
    pc.labels[i] = part;
    if (spec.noise_sigma > 0) {
      x += spec.noise_sigma * rng.normal();
      y += spec.noise_sigma * rng.normal();
      z += spec.noise_sigma * rng.normal();
    }
    pc.points.at(i, 0) = x;
    pc.points.at(i, 1) = y;
    pc.points.at(i, 2) = z;
  }
  return pc;
}

int scene_object_budget(int points_per_object, double near_dist, double dist) {
  return std::max(8, static_cast<int>(std::llround(points_per_object * near_dist / dist)));
}

PointCloud gen_scene(const SceneSpec& spec) {
  if (spec.near_dist >= spec.far_dist)
    throw Error(ErrorCode::ConfigError, "scene near distance must be below far distance");
  if (spec.ground_points < 1 || spec.points_per_object < 1 || spec.n_objects < 0)
    throw Error(ErrorCode::ConfigError, "scene counts must be positive");
  Rng rng(spec.seed);

  std::vector<std::array<double, 3>> pts;
  std::vector<uint8_t> fg;

  for (int i = 0; i < spec.ground_points; ++i) {
    pts.push_back({rng.uniform(-spec.ground_extent, spec.ground_extent),
                   rng.uniform(-spec.ground_extent, spec.ground_extent), 0.0});
    fg.push_back(0);
  }

  constexpr double kObjectRadius = 0.5;
  for (int j = 0; j < spec.n_objects; ++j) {
    const double dist = rng.uniform(spec.near_dist, spec.far_dist);
    const double angle = kTwoPi * rng.uniform();
    const double cx = dist * std::cos(angle);
    const double cy = dist * std::sin(angle);
    const double cz = kObjectRadius;
    const int budget = scene_object_budget(spec.points_per_object, spec.near_dist, dist);
    const bool round_object = (j % 2) == 0;
    for (int i = 0; i < budget; ++i) {
      double x, y, z;
      if (round_object) {
        double norm = 0;
        do {
          x = rng.normal();
          y = rng.normal();
          z = rng.normal();
          norm = std::sqrt(x * x + y * y + z * z);
        } while (norm < 1e-12);
        x *= kObjectRadius / norm;
        y *= kObjectRadius / norm;
        z *= kObjectRadius / norm;
      } else {
        const int face = rng.uniform_int(6);
        const double u = rng.uniform(-kObjectRadius, kObjectRadius);
        const double v = rng.uniform(-kObjectRadius, kObjectRadius);
        const int axis = face / 2;
        const double sign = (face % 2) ? -kObjectRadius : kObjectRadius;
        double p[3];
        p[axis] = sign;
        p[(axis + 1) % 3] = u;
        p[(axis + 2) % 3] = v;
        x = p[0];
        y = p[1];
        z = p[2];
      }
      pts.push_back({cx + x, cy + y, cz + z});
      fg.push_back(1);
    }
  }

  PointCloud pc;
  pc.points = Matrix(static_cast<int>(pts.size()), 3);
  pc.labels.resize(pts.size());
  pc.fg_mask = fg;
  for (size_t i = 0; i < pts.size(); ++i) {
    pc.points.at(static_cast<int>(i), 0) = pts[i][0];
    pc.points.at(static_cast<int>(i), 1) = pts[i][1];
    pc.points.at(static_cast<int>(i), 2) = pts[i][2];
    pc.labels[i] = fg[i];
  }
  return pc;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, "double formatting failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& tok, int line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ": bad number '" + tok + "'");
  return v;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

PointCloud load_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::array<double, 3>> pts;
  std::vector<int> labels;
  std::vector<uint8_t> fg;
  bool any_labels = false, any_fg = false;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() < 3 || toks.size() > 5)
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(lineno) + ": expected 3-5 columns, got " +
                      std::to_string(toks.size()));
    if (!pts.empty() && ((toks.size() >= 4) != any_labels || (toks.size() == 5) != any_fg))
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(lineno) + ": inconsistent column count");
    pts.push_back({parse_double(toks[0], lineno), parse_double(toks[1], lineno),
                   parse_double(toks[2], lineno)});
    if (toks.size() >= 4) {
      any_labels = true;
      labels.push_back(static_cast<int>(parse_double(toks[3], lineno)));
    }
    if (toks.size() == 5) {
      any_fg = true;
      fg.push_back(parse_double(toks[4], lineno) != 0 ? 1 : 0);
    }
  }
  if (pts.empty()) throw Error(ErrorCode::ParseError, "no points in " + path);

  PointCloud pc;
  pc.points = Matrix(static_cast<int>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i)
    for (int c = 0; c < 3; ++c) pc.points.at(static_cast<int>(i), c) = pts[i][c];
  if (any_labels) pc.labels = std::move(labels);
  if (any_fg) pc.fg_mask = std::move(fg);
  validate(pc);
  return pc;
}

void save_xyz(const std::string& path, const PointCloud& pc) {
  validate(pc);
  if (pc.has_fg_mask() && !pc.has_labels())
    throw Error(ErrorCode::IoError, "fg mask requires labels in the xyz format");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  for (int i = 0; i < pc.size(); ++i) {
    out << format_double(pc.points.at(i, 0)) << ' ' << format_double(pc.points.at(i, 1)) << ' '
        << format_double(pc.points.at(i, 2));
    if (pc.has_labels()) out << ' ' << pc.labels[i];
    if (pc.has_fg_mask()) out << ' ' << static_cast<int>(pc.fg_mask[i]);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::string stages_to_string(const EncoderConfig& cfg) {
  std::string s;
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(cfg.stages[i].sample_count) + ":" +
         std::to_string(cfg.stages[i].neighbor_count);
  }
  return s;
}

void parse_stages(const std::string& text, EncoderConfig& cfg) {
  cfg.stages.clear();
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorCode::ConfigError, "stage '" + item + "' must look like M:k");
    try {
      EncoderConfig::Stage st;
      st.sample_count = std::stoi(item.substr(0, colon));
      st.neighbor_count = std::stoi(item.substr(colon + 1));
      cfg.stages.push_back(st);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad stage spec '" + item + "'");
    }
  }
  if (cfg.stages.empty()) throw Error(ErrorCode::ConfigError, "empty stage list");
}

namespace {

void write_le_doubles(std::ofstream& out, const std::vector<double>& vals) {
  static_assert(sizeof(double) == 8);
  for (double v : vals) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    if constexpr (std::endian::native == std::endian::big) {
      uint64_t swapped = 0;
      for (int b = 0; b < 8; ++b) swapped |= ((bits >> (8 * b)) & 0xffULL) << (8 * (7 - b));
      bits = swapped;
    }
    out.write(reinterpret_cast<const char*>(&bits), 8);
  }
}

double read_le_double(std::ifstream& in) {
  uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), 8);
  if (!in) throw Error(ErrorCode::IoError, "checkpoint data truncated");
  if constexpr (std::endian::native == std::endian::big) {
    uint64_t swapped = 0;
    for (int b = 0; b < 8; ++b) swapped |= ((bits >> (8 * b)) & 0xffULL) << (8 * (7 - b));
    bits = swapped;
  }
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<Parameter>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << "POINTE-CKPT v" << meta.version << "\n";
  out << "task " << task_name(meta.task) << "\n";
  out << "num_classes " << meta.num_classes << "\n";
  out << "n_parts " << meta.n_parts << "\n";
  out << "encoder.embed_dim " << meta.encoder.embed_dim << "\n";
  out << "encoder.stages " << stages_to_string(meta.encoder) << "\n";
  out << "encoder.use_normal " << (meta.encoder.use_normal ? 1 : 0) << "\n";
  out << "encoder.use_curvature " << (meta.encoder.use_curvature ? 1 : 0) << "\n";
  out << "encoder.aggregation "
      << (meta.encoder.aggregation == Aggregation::maa ? "maa" : "concat") << "\n";
  out << "encoder.use_dse " << (meta.encoder.use_dse ? 1 : 0) << "\n";
  out << "epoch " << meta.epoch << "\n";
  out << "seed " << meta.seed << "\n";
  out << "best_metric " << format_double(meta.best_metric) << "\n";
  out << "params " << params.size() << "\n";
  for (const Parameter& p : params)
    out << p.name << " " << p.value.rows << " " << p.value.cols << "\n";
  out << "DATA\n";
  for (const Parameter& p : params) write_le_doubles(out, p.value.data);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);

  auto next_line = [&]() {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "truncated header");
    return line;
  };
  auto field = [&](const std::string& line, const std::string& key) {
    if (line.rfind(key + " ", 0) != 0)
      throw Error(ErrorCode::ParseError, "expected '" + key + "', got '" + line + "'");
    return line.substr(key.size() + 1);
  };

  const std::string magic = next_line();
  if (magic.rfind("POINTE-CKPT v", 0) != 0)
    throw Error(ErrorCode::ParseError, "not a checkpoint file");
  const int version = std::stoi(magic.substr(std::string("POINTE-CKPT v").size()));
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::VersionMismatch,
                "checkpoint version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));

  LoadedCheckpoint ck;
  ck.meta.version = version;
  ck.meta.task = task_from_name(field(next_line(), "task"));
  ck.meta.num_classes = std::stoi(field(next_line(), "num_classes"));
  ck.meta.n_parts = std::stoi(field(next_line(), "n_parts"));
  ck.meta.encoder.embed_dim = std::stoi(field(next_line(), "encoder.embed_dim"));
  parse_stages(field(next_line(), "encoder.stages"), ck.meta.encoder);
  ck.meta.encoder.use_normal = field(next_line(), "encoder.use_normal") == "1";
  ck.meta.encoder.use_curvature = field(next_line(), "encoder.use_curvature") == "1";
  ck.meta.encoder.aggregation = field(next_line(), "encoder.aggregation") == "concat"
                                    ? Aggregation::concat
                                    : Aggregation::maa;
  ck.meta.encoder.use_dse = field(next_line(), "encoder.use_dse") == "1";
  ck.meta.epoch = std::stoi(field(next_line(), "epoch"));
  ck.meta.seed = std::stoull(field(next_line(), "seed"));
  ck.meta.best_metric = std::stod(field(next_line(), "best_metric"));
  const int n_params = std::stoi(field(next_line(), "params"));

  std::vector<std::array<std::string, 3>> manifest;
  for (int i = 0; i < n_params; ++i) {
    const auto toks = split_ws(next_line());
    if (toks.size() != 3) throw Error(ErrorCode::ParseError, "bad manifest line");
    manifest.push_back({toks[0], toks[1], toks[2]});
  }
  if (next_line() != "DATA") throw Error(ErrorCode::ParseError, "missing DATA marker");

  for (const auto& entry : manifest) {
    Parameter p;
    p.name = entry[0];
    const int r = std::stoi(entry[1]);
    const int c = std::stoi(entry[2]);
    if (r < 0 || c < 0) throw Error(ErrorCode::ParseError, "bad manifest shape");
    p.value = Matrix(r, c);
    for (double& v : p.value.data) v = read_le_double(in);
    p.grad = Matrix::zeros(r, c);
    ck.params.push_back(std::move(p));
  }
  return ck;
}

}  // namespace pointe
