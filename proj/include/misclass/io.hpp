#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "misclass/model.hpp"

namespace misclass {

// Parsed site file: `site_id,group_id,arm,n_obs,y_obs[,cov_*][,rho2][,rho3]`.
// A group_id of the form "outer/inner" gives a nested group path.
struct SiteTable {
  std::vector<SiteRecord> sites;
  std::vector<std::string> covariate_names;
  // Optional per-site fixed eligibility misclassification rates (default 0).
  std::vector<double> rho2;
  std::vector<double> rho3;
};

struct GroupRegistry {
  double q1 = 0.0;
  double q2 = 0.0;
  // Replace (q1, q2) with the average over the non-imputed groups.
  bool impute = false;
};

// Registry file: `group_id,q1,q2[,impute]`.
using RegistryTable = std::map<std::string, GroupRegistry>;

SiteTable parse_site_table(std::string_view text);
SiteTable read_site_file(const std::string& path);

RegistryTable parse_registry_table(std::string_view text);
RegistryTable read_registry_file(const std::string& path);

// One positive integer per line; blank lines and '#' comments are skipped.
std::vector<std::int64_t> read_size_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace misclass
