#include "rpcompass/model_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "rpcompass/errors.hpp"

namespace rpcompass {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

enum class Section { Root, Rates, Nucleus, Eed };

struct PendingNucleus {
  std::size_t line = 0;
  std::optional<std::string> label;
  std::optional<std::string> radical;
  std::optional<long> multiplicity;
  std::optional<Matrix3> tensor;
};

class Parser {
 public:
  Parser(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  SpinSystem run() {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      const auto end = text_.find('\n', pos);
      std::string_view raw = text_.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
      pos = end == std::string_view::npos ? text_.size() + 1 : end + 1;
      ++line_no;

      std::string_view line = trim(strip_comment(raw));
      if (line.empty()) continue;

      if (line.front() == '[') {
        header(line, line_no);
        continue;
      }

      const auto eq = line.find('=');
      if (eq == std::string_view::npos) fail(line_no, std::string(line), "expected 'key = value'");
      const std::string key(trim(line.substr(0, eq)));
      std::string value(trim(line.substr(eq + 1)));
      const std::size_t key_line = line_no;
      if (key.empty()) fail(line_no, "", "missing key before '='");

      // Arrays may continue over following lines until the closing bracket.
      if (!value.empty() && value.front() == '[') {
        while (value.find(']') == std::string::npos) {
          if (pos > text_.size()) fail(key_line, qualified(key), "unterminated array");
          const auto next_end = text_.find('\n', pos);
          std::string_view next =
              text_.substr(pos, next_end == std::string_view::npos ? std::string_view::npos : next_end - pos);
          pos = next_end == std::string_view::npos ? text_.size() + 1 : next_end + 1;
          ++line_no;
          value += ' ';
          value += trim(strip_comment(next));
        }
      }
      assign(key, value, key_line);
    }
    return finish();
  }

 private:
  [[noreturn]] void fail(std::size_t line, const std::string& field, const std::string& what) const {
    throw ParseError(source_, line, field, what);
  }

  std::string qualified(const std::string& key) const {
    switch (section_) {
      case Section::Root: return key;
      case Section::Rates: return "rates." + key;
      case Section::Eed: return "eed." + key;
      case Section::Nucleus: return "nuclei[" + std::to_string(nuclei_.size() - 1) + "]." + key;
    }
    return key;
  }

  void header(std::string_view line, std::size_t line_no) {
    if (line == "[[nuclei]]") {
      section_ = Section::Nucleus;
      nuclei_.push_back(PendingNucleus{line_no, {}, {}, {}, {}});
    } else if (line == "[rates]") {
      if (seen_rates_) fail(line_no, "rates", "duplicate section");
      seen_rates_ = true;
      section_ = Section::Rates;
    } else if (line == "[eed]") {
      if (seen_eed_) fail(line_no, "eed", "duplicate section");
      seen_eed_ = true;
      eed_line_ = line_no;
      section_ = Section::Eed;
    } else {
      fail(line_no, std::string(line), "unknown section");
    }
  }

  std::string parse_string(const std::string& value, std::size_t line, const std::string& field) const {
    if (value.size() < 2 || value.front() != '"' || value.back() != '"')
      fail(line, field, "expected a quoted string, got '" + value + "'");
    return value.substr(1, value.size() - 2);
  }

  double parse_number(std::string_view token, std::size_t line, const std::string& field) const {
    const std::string s(trim(token));
    if (s.empty()) fail(line, field, "empty number");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
      fail(line, field, "not a finite number: '" + s + "'");
    return v;
  }

  std::vector<double> parse_array(const std::string& value, std::size_t line, const std::string& field) const {
    const auto open = value.find('[');
    const auto close = value.rfind(']');
    if (open != 0 || close != value.size() - 1) fail(line, field, "expected an array '[a, b, ...]'");
    std::string_view body = trim(std::string_view(value).substr(1, value.size() - 2));
    std::vector<double> out;
    if (body.empty()) return out;
    std::size_t start = 0;
    while (true) {
      const auto comma = body.find(',', start);
      std::string_view item = trim(body.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                    : comma - start));
      // Tolerate a trailing comma.
      if (item.empty() && comma == std::string_view::npos && !out.empty()) break;
      out.push_back(parse_number(item, line, field));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return out;
  }

  Matrix3 parse_tensor(const std::string& value, std::size_t line, const std::string& field) const {
    const auto v = parse_array(value, line, field);
    if (v.size() != 9)
      fail(line, field, "expected 9 numbers (row-major 3x3), got " + std::to_string(v.size()));
    Matrix3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = v[static_cast<std::size_t>(3 * r + c)];
    return m;
  }

  void assign(const std::string& key, const std::string& value, std::size_t line) {
    const std::string field = qualified(key);
    switch (section_) {
      case Section::Root:
        if (key == "name") {
          name_ = parse_string(value, line, field);
        } else if (key == "g_factor") {
          g_factor_ = parse_number(value, line, field);
        } else {
          fail(line, field, "unknown key");
        }
        break;
      case Section::Rates:
        if (key == "k_b_per_us") {
          k_b_ = parse_number(value, line, field);
        } else if (key == "k_f_per_us") {
          k_f_ = parse_number(value, line, field);
        } else {
          fail(line, field, "unknown key");
        }
        break;
      case Section::Nucleus: {
        PendingNucleus& n = nuclei_.back();
        if (key == "label") {
          n.label = parse_string(value, line, field);
        } else if (key == "radical") {
          n.radical = parse_string(value, line, field);
          if (*n.radical != "A" && *n.radical != "B") fail(line, field, "radical must be \"A\" or \"B\"");
        } else if (key == "multiplicity") {
          const double m = parse_number(value, line, field);
          if (m != std::floor(m) || m < 0 || m > 1e6) fail(line, field, "multiplicity must be a positive integer");
          n.multiplicity = static_cast<long>(m);
        } else if (key == "tensor_mT") {
          n.tensor = parse_tensor(value, line, field);
        } else {
          fail(line, field, "unknown key");
        }
        break;
      }
      case Section::Eed:
        if (key == "tensor_mT") {
          if (eed_) fail(line, field, "EED given twice");
          eed_ = parse_tensor(value, line, field);
        } else if (key == "point_dipole_r_nm") {
          if (eed_) fail(line, field, "EED given twice");
          const auto r = parse_array(value, line, field);
          if (r.size() != 3) fail(line, field, "expected 3 numbers, got " + std::to_string(r.size()));
          try {
            eed_ = point_dipole_tensor(Vector3(r[0], r[1], r[2]), g_factor_);
          } catch (const InvalidArgument& e) {
            fail(line, field, e.what());
          }
        } else {
          fail(line, field, "unknown key");
        }
        break;
    }
  }

  SpinSystem finish() const {
    if (!name_) fail(1, "name", "missing required field");
    if (seen_eed_ && !eed_) fail(eed_line_, "eed", "section needs tensor_mT or point_dipole_r_nm");

    SpinSystem system;
    system.name = *name_;
    system.g_factor = g_factor_;
    system.k_b = k_b_;
    system.k_f = k_f_;
    system.eed_mT = eed_;
    for (std::size_t i = 0; i < nuclei_.size(); ++i) {
      const PendingNucleus& p = nuclei_[i];
      const std::string prefix = "nuclei[" + std::to_string(i) + "].";
      if (!p.label) fail(p.line, prefix + "label", "missing required field");
      if (!p.radical) fail(p.line, prefix + "radical", "missing required field");
      if (!p.multiplicity) fail(p.line, prefix + "multiplicity", "missing required field");
      if (!p.tensor) fail(p.line, prefix + "tensor_mT", "missing required field");
      system.nuclei.push_back(Nucleus{*p.label, static_cast<int>(*p.multiplicity), *p.tensor,
                                      *p.radical == "A" ? Radical::A : Radical::B});
    }
    return system;
  }

  std::string_view text_;
  std::string source_;
  Section section_ = Section::Root;
  bool seen_rates_ = false;
  bool seen_eed_ = false;
  std::size_t eed_line_ = 0;

  std::optional<std::string> name_;
  double g_factor_ = units::kDefaultGFactor;
  double k_b_ = 1.0;
  double k_f_ = 1.0;
  std::optional<Matrix3> eed_;
  std::vector<PendingNucleus> nuclei_;
};

void write_tensor(std::ostringstream& out, const Matrix3& m) {
  out << "[";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out << m(r, c) << (r == 2 && c == 2 ? "" : ", ");
  out << "]\n";
}

}  // namespace

SpinSystem parse_spin_system(std::string_view text, const std::string& source, std::size_t dimension_cap) {
  SpinSystem system = Parser(text, source).run();
  system.validate(dimension_cap);
  return system;
}

SpinSystem load_spin_system(const std::filesystem::path& path, std::size_t dimension_cap) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_spin_system(buffer.str(), path.string(), dimension_cap);
}

std::string format_spin_system(const SpinSystem& system) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "name = \"" << system.name << "\"\n";
  out << "g_factor = " << system.g_factor << "\n\n";
  out << "[rates]\nk_b_per_us = " << system.k_b << "\nk_f_per_us = " << system.k_f << "\n";
  for (const auto& n : system.nuclei) {
    out << "\n[[nuclei]]\nlabel = \"" << n.label << "\"\nradical = \"" << (n.radical == Radical::A ? "A" : "B")
        << "\"\nmultiplicity = " << n.multiplicity << "\ntensor_mT = ";
    write_tensor(out, n.hyperfine_mT);
  }
  if (system.eed_mT) {
    out << "\n[eed]\ntensor_mT = ";
    write_tensor(out, *system.eed_mT);
  }
  return out.str();
}

}  // namespace rpcompass
