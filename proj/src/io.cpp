#include "misclass/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "misclass/error.hpp"

namespace misclass {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Non-empty, non-comment lines paired with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> content_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    const auto line = trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    ++number;
    if (!line.empty() && line.front() != '#') out.emplace_back(number, line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string where(std::string_view file, std::size_t line) {
  return std::string(file) + " line " + std::to_string(line) + ": ";
}

double parse_real(std::string_view s, const std::string& context) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError(context + "expected a number, got '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_count(std::string_view s, const std::string& context) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError(context + "expected an integer, got '" + std::string(s) + "'");
  return v;
}

bool parse_flag(std::string_view s, const std::string& context) {
  if (s.empty() || s == "0" || s == "false" || s == "no") return false;
  if (s == "1" || s == "true" || s == "yes" || s == "impute") return true;
  throw InputError(context + "expected a boolean, got '" + std::string(s) + "'");
}

}  // namespace

SiteTable parse_site_table(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw InputError("site file is empty");
  const auto header = split(lines.front().second, ',');
  const std::vector<std::string_view> required = {"site_id", "group_id", "arm", "n_obs", "y_obs"};
  if (header.size() < required.size() || !std::equal(required.begin(), required.end(), header.begin()))
    throw InputError("site file header must start with site_id,group_id,arm,n_obs,y_obs");

  SiteTable table;
  std::vector<std::size_t> cov_columns;
  std::size_t rho2_column = 0;
  std::size_t rho3_column = 0;
  for (std::size_t c = required.size(); c < header.size(); ++c) {
    if (header[c].starts_with("cov_")) {
      table.covariate_names.emplace_back(header[c]);
      cov_columns.push_back(c);
    } else if (header[c] == "rho2") {
      rho2_column = c;
    } else if (header[c] == "rho3") {
      rho3_column = c;
    } else {
      throw InputError("site file: unknown column '" + std::string(header[c]) + "'");
    }
  }

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [number, line] = lines[i];
    const std::string ctx = where("site file", number);
    const auto fields = split(line, ',');
    if (fields.size() != header.size())
      throw InputError(ctx + "expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    SiteRecord r;
    r.site_id = std::string(fields[0]);
    for (auto part : split(fields[1], '/')) r.group_path.emplace_back(part);
    r.arm = static_cast<int>(parse_count(fields[2], ctx));
    r.n_obs = parse_count(fields[3], ctx);
    r.y_obs = parse_count(fields[4], ctx);
    for (auto c : cov_columns) r.covariates.push_back(parse_real(fields[c], ctx));
    table.rho2.push_back(rho2_column ? parse_real(fields[rho2_column], ctx) : 0.0);
    table.rho3.push_back(rho3_column ? parse_real(fields[rho3_column], ctx) : 0.0);
    if (table.rho2.back() < 0.0 || table.rho2.back() > 1.0 || table.rho3.back() < 0.0 ||
        table.rho3.back() > 1.0)
      throw InputError(ctx + "eligibility rates must lie in [0, 1]");
    table.sites.push_back(std::move(r));
  }
  if (table.sites.empty()) throw InputError("site file has no sites");
  return table;
}

RegistryTable parse_registry_table(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw InputError("registry file is empty");
  const auto header = split(lines.front().second, ',');
  const bool has_impute = header.size() == 4 && header[3] == "impute";
  if (header.size() < 3 || header[0] != "group_id" || header[1] != "q1" || header[2] != "q2" ||
      (header.size() == 4 && !has_impute) || header.size() > 4)
    throw InputError("registry file header must be group_id,q1,q2[,impute]");

  RegistryTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [number, line] = lines[i];
    const std::string ctx = where("registry file", number);
    const auto fields = split(line, ',');
    if (fields.size() != header.size())
      throw InputError(ctx + "expected " + std::to_string(header.size()) + " fields");
    GroupRegistry g;
    g.impute = has_impute && parse_flag(fields[3], ctx);
    if (!g.impute || (!fields[1].empty() && !fields[2].empty())) {
      if (fields[1].empty() || fields[2].empty())
        throw InputError(ctx + "q1 and q2 are required unless the group is imputed");
      g.q1 = parse_real(fields[1], ctx);
      g.q2 = parse_real(fields[2], ctx);
      if (g.q1 < 0.0 || g.q2 < 0.0 || g.q1 + g.q2 > 1.0)
        throw InputError(ctx + "registry rates need q1, q2 >= 0 and q1 + q2 <= 1");
    }
    if (!table.emplace(std::string(fields[0]), g).second)
      throw InputError(ctx + "duplicate group '" + std::string(fields[0]) + "'");
  }
  return table;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError("failed writing '" + path + "'");
}

SiteTable read_site_file(const std::string& path) { return parse_site_table(read_text_file(path)); }

RegistryTable read_registry_file(const std::string& path) {
  return parse_registry_table(read_text_file(path));
}

std::vector<std::int64_t> read_size_file(const std::string& path) {
  std::vector<std::int64_t> sizes;
  for (const auto& [number, line] : content_lines(read_text_file(path))) {
    const auto v = parse_count(line, where("size file", number));
    if (v <= 0) throw InputError(where("size file", number) + "sizes must be positive");
    sizes.push_back(v);
  }
  return sizes;
}

}  // namespace misclass
