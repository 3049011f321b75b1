#include "fcil/datasets.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fcil/error.hpp"

namespace fcil {

std::vector<int> TaskStream::classes_through(std::size_t task_index) const {
  std::vector<int> out;
  for (std::size_t t = 0; t <= task_index && t < tasks.size(); ++t)
    out.insert(out.end(), tasks[t].classes.begin(), tasks[t].classes.end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

Sample gaussian_sample(std::mt19937_64& rng, double mx, double my, int label,
                       std::optional<int> z) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Sample s;
  s.features = Vector(2);
  s.features[0] = mx + n01(rng);
  s.features[1] = my + n01(rng);
  s.label = label;
  s.sensitive = z;
  return s;
}

}  // namespace

TaskStream gen_toy_gaussians(int n_per_class, std::uint64_t seed, ToyVariant variant,
                             int n_test_per_class) {
  if (n_per_class < 1) throw ContractViolation("gen_toy_gaussians: n_per_class must be >= 1");
  if (n_test_per_class < 0) n_test_per_class = n_per_class;

  constexpr std::array<std::array<double, 2>, 3> kMeans{{{-2.0, -2.0}, {2.0, 4.0}, {4.0, 2.0}}};
  // Source class -> (label, sensitive) under each variant.
  constexpr std::array<std::array<int, 2>, 3> kYz{{{0, 0}, {0, 1}, {1, 1}}};
  const bool yz = variant == ToyVariant::label_and_attribute;

  std::mt19937_64 rng(seed);
  auto draw = [&](int source, int count, std::vector<Sample>& out) {
    for (int i = 0; i < count; ++i) {
      const int label = yz ? kYz[source][0] : source;
      const std::optional<int> z = yz ? std::optional<int>(kYz[source][1]) : std::nullopt;
      out.push_back(gaussian_sample(rng, kMeans[source][0], kMeans[source][1], label, z));
    }
  };

  TaskStream s;
  s.num_features = 2;
  s.tasks.resize(2);
  s.test.resize(2);
  for (int t = 0; t < 2; ++t) s.tasks[t].task_id = s.test[t].task_id = t;
  draw(0, n_per_class, s.tasks[0].samples);
  draw(1, n_per_class, s.tasks[0].samples);
  draw(2, n_per_class, s.tasks[1].samples);
  draw(0, n_test_per_class, s.test[0].samples);
  draw(1, n_test_per_class, s.test[0].samples);
  draw(2, n_test_per_class, s.test[1].samples);

  if (yz) {
    s.tasks[0].classes = {0};
    s.tasks[1].classes = {1};
    s.all_classes = {0, 1};
    s.sensitive_values = {0, 1};
    s.num_classes = 2;
  } else {
    s.tasks[0].classes = {0, 1};
    s.tasks[1].classes = {2};
    s.all_classes = {0, 1, 2};
    s.num_classes = 3;
  }
  for (int t = 0; t < 2; ++t) s.test[t].classes = s.tasks[t].classes;
  return s;
}

TaskStream gen_color_biased(const ColorBiasConfig& cfg, std::uint64_t seed) {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(cfg.bias_train) || !in_unit(cfg.bias_test))
    throw ContractViolation("gen_color_biased: bias probabilities must lie in [0,1]");
  if (cfg.n_classes < 2) throw ContractViolation("gen_color_biased: need at least two classes");
  if (cfg.n_per_class < 1 || cfg.n_test_per_class < 0 || cfg.base_dim < 1)
    throw ContractViolation("gen_color_biased: invalid sizes");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> other_color(0, cfg.n_classes - 2);

  std::vector<Vector> centers;
  for (int c = 0; c < cfg.n_classes; ++c) {
    Vector v(cfg.base_dim);
    for (int d = 0; d < cfg.base_dim; ++d) v[d] = cfg.center_scale * n01(rng);
    centers.push_back(std::move(v));
  }

  const int dim = cfg.base_dim + cfg.n_classes;
  auto draw = [&](int count, double bias, std::vector<Sample>& out) {
    for (int c = 0; c < cfg.n_classes; ++c) {
      for (int i = 0; i < count; ++i) {
        Sample s;
        s.features = Vector::Zero(dim);
        for (int d = 0; d < cfg.base_dim; ++d) s.features[d] = centers[c][d] + n01(rng);
        const bool canonical = u01(rng) < bias;
        int color = c;
        if (!canonical) {
          color = other_color(rng);
          if (color >= c) ++color;
        }
        s.features[cfg.base_dim + color] = cfg.color_strength;
        s.label = c;
        s.sensitive = canonical ? 1 : 0;
        out.push_back(std::move(s));
      }
    }
  };

  LabeledData train, test;
  draw(cfg.n_per_class, cfg.bias_train, train.samples);
  draw(cfg.n_test_per_class, cfg.bias_test, test.samples);
  TaskStream s = split_tasks(train, test, cfg.tasks);
  // Groups are (class, canonical?) even if a degenerate bias leaves one empty.
  s.sensitive_values = {0, 1};
  return s;
}

TaskStream split_tasks(const LabeledData& train, const LabeledData& test, int num_tasks) {
  if (train.samples.empty()) throw ContractViolation("split_tasks: empty dataset");
  std::set<int> class_set;
  std::set<int> z_set;
  std::size_t with_z = 0;
  for (const auto& s : train.samples) {
    class_set.insert(s.label);
    if (s.sensitive) {
      z_set.insert(*s.sensitive);
      ++with_z;
    }
  }
  if (with_z != 0 && with_z != train.samples.size())
    throw ContractViolation("split_tasks: sensitive attribute present on only some samples");
  const std::vector<int> classes(class_set.begin(), class_set.end());
  const int n_classes = static_cast<int>(classes.size());
  if (num_tasks < 1 || num_tasks > n_classes)
    throw ContractViolation(fmt::format("split_tasks: cannot split {} classes into {} tasks",
                                        n_classes, num_tasks));

  TaskStream s;
  s.num_features = static_cast<int>(train.samples.front().features.size());
  s.num_classes = classes.back() + 1;
  s.all_classes = classes;
  s.sensitive_values.assign(z_set.begin(), z_set.end());
  s.tasks.resize(static_cast<std::size_t>(num_tasks));
  s.test.resize(static_cast<std::size_t>(num_tasks));

  const int per_task = n_classes / num_tasks;
  if (n_classes % num_tasks != 0)
    s.warnings.push_back(fmt::format(
        "split_tasks: {} classes do not divide into {} tasks; last task takes {} extra",
        n_classes, num_tasks, n_classes % num_tasks));
  std::map<int, int> task_of;
  for (int i = 0; i < n_classes; ++i) {
    const int t = std::min(i / per_task, num_tasks - 1);
    task_of[classes[static_cast<std::size_t>(i)]] = t;
    s.tasks[static_cast<std::size_t>(t)].classes.push_back(classes[static_cast<std::size_t>(i)]);
  }
  for (int t = 0; t < num_tasks; ++t) {
    s.tasks[static_cast<std::size_t>(t)].task_id = t;
    s.test[static_cast<std::size_t>(t)].task_id = t;
    s.test[static_cast<std::size_t>(t)].classes = s.tasks[static_cast<std::size_t>(t)].classes;
  }
  for (const auto& smp : train.samples) s.tasks[static_cast<std::size_t>(task_of[smp.label])].samples.push_back(smp);

  std::size_t dropped = 0;
  for (const auto& smp : test.samples) {
    auto it = task_of.find(smp.label);
    if (it == task_of.end()) {
      ++dropped;
      continue;
    }
    if (static_cast<int>(smp.features.size()) != s.num_features)
      throw ContractViolation("split_tasks: test feature dimension differs from train");
    s.test[static_cast<std::size_t>(it->second)].samples.push_back(smp);
  }
  if (dropped > 0)
    s.warnings.push_back(
        fmt::format("split_tasks: dropped {} test samples of classes absent from training", dropped));
  return s;
}

TaskStream split_tasks(const LabeledData& train, int num_tasks) {
  return split_tasks(train, LabeledData{}, num_tasks);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view field) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) return std::nullopt;
  return v;
}

int parse_id(std::string_view field, const std::string& where, const char* what) {
  const auto v = parse_double(field);
  if (!v) throw ParseError(fmt::format("{}: {} '{}' is not a number", where, what, field));
  if (*v < 0.0 || *v != static_cast<double>(static_cast<long long>(*v)) || *v > 1e9)
    throw ParseError(fmt::format("{}: {} '{}' out of range (non-negative integer expected)",
                                 where, what, field));
  return static_cast<int>(*v);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

LabeledData read_csv(std::istream& in, const CsvOptions& opts, const std::string& source) {
  LabeledData data;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> width;
  std::optional<std::size_t> label_col;
  std::optional<std::size_t> z_col;
  bool first_row = true;

  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    const std::string where = fmt::format("{}:{}", source, line_no);

    if (first_row) {
      first_row = false;
      const bool header = std::any_of(fields.begin(), fields.end(),
                                      [](std::string_view f) { return !parse_double(f); });
      width = fields.size();
      if (header) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
          const auto name = lower(fields[i]);
          if (name == "label" || name == "y") label_col = i;
          if (name == "sensitive" || name == "z") z_col = i;
        }
      }
      if (!label_col) {
        if (opts.num_features) {
          const auto nf = static_cast<std::size_t>(*opts.num_features);
          if (nf + 1 > fields.size())
            throw ParseError(fmt::format("{}: expected at least {} columns, found {}", where,
                                         nf + 1, fields.size()));
          label_col = nf;
          if (fields.size() > nf + 1) z_col = nf + 1;
        } else {
          const std::size_t tail = opts.has_sensitive ? 2 : 1;
          if (fields.size() < tail + 1)
            throw ParseError(fmt::format("{}: too few columns ({})", where, fields.size()));
          label_col = fields.size() - tail;
          if (opts.has_sensitive) z_col = fields.size() - 1;
        }
      }
      if (header) continue;
    }

    if (fields.size() != *width)
      throw ParseError(fmt::format("{}: ragged row, expected {} fields but found {}", where,
                                   *width, fields.size()));
    Sample s;
    std::vector<double> feats;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == *label_col) {
        s.label = parse_id(fields[i], where, "label");
      } else if (z_col && i == *z_col) {
        s.sensitive = parse_id(fields[i], where, "sensitive attribute");
      } else {
        const auto v = parse_double(fields[i]);
        if (!v)
          throw ParseError(fmt::format("{}: column {} value '{}' is not a number", where, i + 1,
                                       fields[i]));
        feats.push_back(*v);
      }
    }
    s.features = Eigen::Map<const Vector>(feats.data(), static_cast<Eigen::Index>(feats.size()));
    data.samples.push_back(std::move(s));
  }
  if (data.samples.empty()) throw ParseError(fmt::format("{}: no data rows", source));
  return data;
}

IdxArray read_idx(std::istream& in, const std::string& source) {
  auto fail = [&](std::size_t offset, const std::string& msg) {
    return ParseError(fmt::format("{}: offset {}: {}", source, offset, msg));
  };
  std::array<unsigned char, 4> magic{};
  if (!in.read(reinterpret_cast<char*>(magic.data()), 4))
    throw fail(0, "truncated or empty file (missing magic number)");
  if (magic[0] != 0 || magic[1] != 0) throw fail(0, "bad magic number");
  if (magic[2] != 0x08) throw fail(2, "unsupported element type (only unsigned byte)");
  const int ndims = magic[3];
  if (ndims < 1) throw fail(3, "zero dimensions");

  IdxArray arr;
  std::size_t total = 1;
  for (int d = 0; d < ndims; ++d) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4))
      throw fail(4 + 4 * static_cast<std::size_t>(d), "truncated dimension header");
    const std::uint32_t dim = (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
                              (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
    arr.dims.push_back(dim);
    total *= dim;
  }
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(ndims);
  arr.data.resize(total);
  if (total > 0 && !in.read(reinterpret_cast<char*>(arr.data.data()),
                            static_cast<std::streamsize>(total)))
    throw fail(header + static_cast<std::size_t>(in.gcount()),
               fmt::format("payload truncated, expected {} bytes", total));
  if (in.peek() != std::char_traits<char>::eof())
    throw fail(header + total, "trailing bytes after payload");
  return arr;
}

Matrix idx_images(const IdxArray& images) {
  if (images.dims.size() < 2) throw ParseError("idx images: expected at least 2 dimensions");
  const auto n = static_cast<Eigen::Index>(images.dims[0]);
  const auto pixels = n == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(images.data.size()) / n;
  Matrix x(n, pixels);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < pixels; ++j)
      x(i, j) = images.data[static_cast<std::size_t>(i * pixels + j)] / 255.0;
  return x;
}

namespace {

std::ifstream open_binary(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", p.string()));
  return in;
}

}  // namespace

LabeledData ingest(const IngestSpec& spec) {
  if (spec.format == DataFormat::csv) {
    auto in = open_binary(spec.path);
    return read_csv(in, spec.csv, spec.path.string());
  }
  if (spec.labels_path.empty()) throw ConfigError("idx ingest requires a labels file");
  auto img_in = open_binary(spec.path);
  auto lbl_in = open_binary(spec.labels_path);
  const IdxArray images = read_idx(img_in, spec.path.string());
  const IdxArray labels = read_idx(lbl_in, spec.labels_path.string());
  if (labels.dims.size() != 1) throw ParseError(spec.labels_path.string() + ": labels must be 1-D");
  const Matrix x = idx_images(images);
  if (static_cast<std::size_t>(x.rows()) != labels.data.size())
    throw ParseError(fmt::format("{}: {} labels for {} images", spec.labels_path.string(),
                                 labels.data.size(), x.rows()));
  LabeledData data;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    data.samples.push_back(Sample{x.row(i).transpose(), labels.data[static_cast<std::size_t>(i)], std::nullopt});
  return data;
}

void write_csv(std::ostream& out, std::span<const Sample> samples) {
  if (samples.empty()) return;
  const auto dim = samples.front().features.size();
  const bool z = samples.front().sensitive.has_value();
  for (Eigen::Index d = 0; d < dim; ++d) out << "x" << d << ',';
  out << "label" << (z ? ",sensitive\n" : "\n");
  for (const auto& s : samples) {
    for (Eigen::Index d = 0; d < dim; ++d) out << fmt::format("{}", s.features[d]) << ',';
    out << s.label;
    if (z) out << ',' << s.sensitive.value_or(0);
    out << '\n';
  }
}

}  // namespace fcil
