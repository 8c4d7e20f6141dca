#include "weakdiff/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <set>
#include <sstream>

#include "weakdiff/config.hpp"

namespace weakdiff {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw FormatError(source + ":" + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& text, const std::string& source, std::size_t line) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) fail(source, line, "expected a number, got '" + text + "'");
  return v;
}

Metadata parse_metadata(const std::string& line) {
  Metadata meta;
  std::istringstream in(line.substr(1));
  std::string item;
  while (in >> item) {
    const auto eq = item.find('=');
    if (eq != std::string::npos) meta[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return meta;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
  std::string next() {
    std::string line;
    if (!std::getline(in_, line)) fail(source_, line_ + 1, "unexpected end of file");
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
  // "<keyword> rest..." -> rest
  std::string expect(const std::string& keyword) {
    const std::string line = next();
    if (line.rfind(keyword, 0) != 0 || (line.size() > keyword.size() && line[keyword.size()] != ' ')) {
      fail(source_, line_, "expected '" + keyword + "'");
    }
    return line.size() > keyword.size() ? line.substr(keyword.size() + 1) : std::string();
  }
  double number() { return parse_number(next(), source_, line_); }
  std::size_t count(const std::string& text) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail(source_, line_, "expected a count");
    return v;
  }
  std::vector<double> numbers(std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = number();
    return v;
  }
  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

}  // namespace

std::string metadata_line(const Metadata& meta) {
  std::string out = "#";
  for (const auto& [k, v] : meta) out += " " + k + "=" + v;
  return out;
}

void write_dataset(std::ostream& out, std::span<const DataRecord> records) {
  for (const DataRecord& r : records) {
    json j;
    j["id"] = r.id;
    j["image"] = r.image.values();
    j["caption"] = r.caption;
    if (!r.true_attributes.empty()) j["true_attributes"] = r.true_attributes;
    if (r.corrupted) j["corrupted"] = *r.corrupted;
    out << j.dump() << '\n';
  }
}

std::vector<DataRecord> read_dataset(std::istream& in, const std::string& source_name) {
  std::vector<DataRecord> records;
  std::string line;
  std::size_t line_no = 0;
  std::size_t image_dim = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(source_name, line_no, "not a JSON object");
    try {
      DataRecord r;
      r.id = j.at("id").get<std::string>();
      r.image = ImageVector(j.at("image").get<std::vector<double>>());
      r.caption = j.at("caption").get<TokenList>();
      if (j.contains("true_attributes")) r.true_attributes = j["true_attributes"].get<TokenList>();
      if (j.contains("corrupted")) r.corrupted = j["corrupted"].get<bool>();
      if (r.image.empty() || !r.image.all_finite()) fail(source_name, line_no, "image must be a non-empty finite array");
      if (image_dim == 0) image_dim = r.image.size();
      if (r.image.size() != image_dim) {
        fail(source_name, line_no,
             "image has " + std::to_string(r.image.size()) + " values, expected " + std::to_string(image_dim));
      }
      if (!ids.insert(r.id).second) fail(source_name, line_no, "duplicate id '" + r.id + "'");
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail(source_name, line_no, std::string("malformed record: ") + e.what());
    }
  }
  return records;
}

void write_samples(std::ostream& out, const Metadata& meta, std::size_t latent_dim, std::size_t image_dim,
                   std::span<const LatentVector> latents, std::span<const ImageVector> images) {
  if (!images.empty()) require_same_size(images.size(), latents.size(), "write_samples");
  out << metadata_line(meta) << '\n';
  std::string header;
  for (std::size_t j = 0; j < latent_dim; ++j) header += (j ? ",z" : "z") + std::to_string(j);
  for (std::size_t j = 0; j < image_dim; ++j) header += ",x" + std::to_string(j);
  out << header << '\n';
  for (std::size_t i = 0; i < latents.size(); ++i) {
    require_same_size(latents[i].size(), latent_dim, "write_samples latent");
    std::string row;
    for (std::size_t j = 0; j < latent_dim; ++j) row += (j ? "," : "") + format_double(latents[i][j]);
    if (image_dim > 0) {
      require_same_size(images[i].size(), image_dim, "write_samples image");
      for (std::size_t j = 0; j < image_dim; ++j) row += "," + format_double(images[i][j]);
    }
    out << row << '\n';
  }
}

SampleTable read_samples(std::istream& in, const std::string& source_name) {
  SampleTable table;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(source_name, 1, "empty sample file");
  ++line_no;
  if (!line.empty() && line.front() == '#') {
    table.meta = parse_metadata(line);
    if (!std::getline(in, line)) fail(source_name, 2, "missing CSV header");
    ++line_no;
  }
  for (const std::string& col : split(line, ',')) {
    if (col.size() >= 2 && col[0] == 'z' && table.image_dim == 0) {
      ++table.latent_dim;
    } else if (col.size() >= 2 && col[0] == 'x') {
      ++table.image_dim;
    } else {
      fail(source_name, line_no, "unexpected column '" + col + "'");
    }
  }
  if (table.latent_dim == 0) fail(source_name, line_no, "no latent columns");
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() != table.latent_dim + table.image_dim) {
      fail(source_name, line_no,
           "expected " + std::to_string(table.latent_dim + table.image_dim) + " columns, got " +
               std::to_string(cells.size()));
    }
    LatentVector z = LatentVector::zeros(table.latent_dim);
    for (std::size_t j = 0; j < table.latent_dim; ++j) z[j] = parse_number(cells[j], source_name, line_no);
    table.latents.push_back(std::move(z));
    if (table.image_dim > 0) {
      ImageVector x = ImageVector::zeros(table.image_dim);
      for (std::size_t j = 0; j < table.image_dim; ++j) {
        x[j] = parse_number(cells[table.latent_dim + j], source_name, line_no);
      }
      table.images.push_back(std::move(x));
    }
  }
  return table;
}

void write_train_log(std::ostream& out, const Metadata& meta, std::span<const TrainLogEntry> log) {
  out << metadata_line(meta) << '\n';
  out << "step,phase,L_denoise,L_prompt,L_recon,L_total,wallclock\n";
  for (const TrainLogEntry& e : log) {
    out << e.step << ',' << e.phase << ',' << format_double(e.l_denoise) << ',' << format_double(e.l_prompt) << ','
        << format_double(e.l_recon) << ',' << format_double(e.l_total) << ',' << format_double(e.wallclock) << '\n';
  }
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto values = [&](std::span<const double> v) {
    for (double x : v) out << format_double(x) << '\n';
  };
  out << kCheckpointMagic << '\n';
  out << "config_hash " << ckpt.config_hash << '\n';
  out << "stage " << ckpt.stage << '\n';
  out << "shape " << ckpt.shape.latent_dim << ' ' << ckpt.shape.token_dim << ' ' << ckpt.shape.hidden_dim << ' '
      << ckpt.shape.steps << '\n';
  out << "schedule " << format_double(ckpt.beta_start) << ' ' << format_double(ckpt.beta_end) << '\n';
  out << "parameters " << ckpt.parameters.size() << '\n';
  values(ckpt.parameters);
  const LinearCodec& c = ckpt.codec;
  out << "codec " << c.image_dim() << ' ' << c.latent_dim() << '\n';
  out << "residual " << format_double(c.fitted_residual()) << '\n';
  out << "mean\n";
  values(c.mean().span());
  out << "encoder\n";
  values(c.encoder().storage());
  out << "decoder\n";
  values(c.decoder().storage());
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source_name) {
  LineReader r(in, source_name);
  if (r.next() != kCheckpointMagic) fail(source_name, 1, "not a weakdiff checkpoint (bad header)");
  const std::string hash = r.expect("config_hash");
  const std::string stage = r.expect("stage");

  std::istringstream shape_in(r.expect("shape"));
  MlpShape shape;
  if (!(shape_in >> shape.latent_dim >> shape.token_dim >> shape.hidden_dim >> shape.steps)) {
    fail(source_name, r.line(), "malformed shape line");
  }
  std::istringstream sched_in(r.expect("schedule"));
  std::string bs, be;
  if (!(sched_in >> bs >> be)) fail(source_name, r.line(), "malformed schedule line");
  const double beta_start = parse_number(bs, source_name, r.line());
  const double beta_end = parse_number(be, source_name, r.line());

  const std::size_t n_params = r.count(r.expect("parameters"));
  try {
    shape.validate();
  } catch (const std::invalid_argument& e) {
    fail(source_name, r.line(), std::string("invalid shape: ") + e.what());
  }
  if (n_params != shape.parameter_count()) {
    fail(source_name, r.line(), "parameter count " + std::to_string(n_params) + " does not match shape (" +
                                    std::to_string(shape.parameter_count()) + ")");
  }
  std::vector<double> params = r.numbers(n_params);

  std::istringstream codec_in(r.expect("codec"));
  std::size_t m = 0, d = 0;
  if (!(codec_in >> m >> d) || m == 0 || d == 0) fail(source_name, r.line(), "malformed codec line");
  const double residual = parse_number(r.expect("residual"), source_name, r.line());
  r.expect("mean");
  ImageVector mean(r.numbers(m));
  r.expect("encoder");
  Matrix encoder(d, m, r.numbers(d * m));
  r.expect("decoder");
  Matrix decoder(m, d, r.numbers(m * d));
  r.expect("end");
  return Checkpoint{hash,      stage,  shape, beta_start, beta_end, std::move(params),
                    LinearCodec::from_parts(std::move(encoder), std::move(decoder), std::move(mean), residual)};
}

std::string filter_report_json(const FilterReport& report, const Metadata& meta) {
  json j;
  for (const auto& [k, v] : meta) j[k] = v;
  j["total"] = report.total;
  j["kept"] = report.kept;
  j["dropped"] = report.dropped;
  j["tau"] = report.tau;
  j["kept_empty"] = report.kept == 0;
  j["score_histogram"] = {{"range", {-1.0, 1.0}}, {"counts", report.score_histogram}};
  if (report.confusion) {
    const ConfusionMatrix& c = *report.confusion;
    j["confusion"] = {{"clean_kept", c.clean_kept},
                      {"clean_dropped", c.clean_dropped},
                      {"corrupted_kept", c.corrupted_kept},
                      {"corrupted_dropped", c.corrupted_dropped},
                      {"clean_recall", c.clean_recall()},
                      {"false_keep_rate", c.false_keep_rate()}};
  }
  return j.dump(2) + "\n";
}

void write_filter_scores(std::ostream& out, const Metadata& meta, std::span<const DataRecord> records,
                         const FilterReport& report) {
  require_same_size(records.size(), report.scores.size(), "write_filter_scores");
  out << metadata_line(meta) << '\n';
  out << "id,score,kept,corrupted\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << records[i].id << ',' << format_double(report.scores[i]) << ',' << (report.scores[i] > report.tau ? 1 : 0)
        << ',' << (records[i].corrupted ? (*records[i].corrupted ? "true" : "false") : "") << '\n';
  }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string pgm_grid(std::span<const ImageVector> images, std::size_t columns) {
  if (images.empty()) throw std::invalid_argument("pgm_grid: no images");
  const std::size_t m = images.front().size();
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(m))));
  if (side * side != m) throw std::invalid_argument("pgm_grid: image dimension is not a perfect square");
  columns = std::max<std::size_t>(1, std::min(columns, images.size()));
  const std::size_t rows = (images.size() + columns - 1) / columns;

  double lo = images.front()[0], hi = lo;
  for (const ImageVector& x : images) {
    require_same_size(x.size(), m, "pgm_grid image");
    for (double v : x) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  const std::size_t width = columns * side;
  const std::size_t height = rows * side;
  std::string pixels(width * height, '\0');
  for (std::size_t k = 0; k < images.size(); ++k) {
    const std::size_t ox = (k % columns) * side;
    const std::size_t oy = (k / columns) * side;
    for (std::size_t p = 0; p < m; ++p) {
      const double level = std::round(255.0 * (images[k][p] - lo) / span);
      pixels[(oy + p / side) * width + ox + p % side] = static_cast<char>(static_cast<unsigned char>(level));
    }
  }
  return "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n" + pixels;
}

}  // namespace weakdiff
