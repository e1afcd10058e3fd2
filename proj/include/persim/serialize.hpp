#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>

#include "persim/adam.hpp"
#include "persim/agents.hpp"
#include "persim/clustering.hpp"
#include "persim/env.hpp"
#include "persim/mlp.hpp"

namespace persim {

// Plain-text, versioned dump formats. Every real is written as a C hexfloat
// token ("%a"), so round-trips are bit-exact while the files stay diffable.
// Each format starts with its schema string:
//   persim-env/v1       environment: config + action matrix + both extractors
//   persim-clusters/v1  cluster model: centroids + fit metadata
//   persim-agent/v1     agent checkpoint: config + networks + optimizer state

void write_real_token(std::ostream& out, real v);
real read_real_token(std::istream& in);

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

void write_adam(std::ostream& out, const AdamState& state);
AdamState read_adam(std::istream& in, const Mlp& params);

void save_environment(std::ostream& out, const Environment& env);
Environment load_environment(std::istream& in);
void save_environment_file(const std::filesystem::path& path, const Environment& env);
Environment load_environment_file(const std::filesystem::path& path);

void save_cluster_model(std::ostream& out, const ClusterModel& model);
ClusterModel load_cluster_model(std::istream& in);

void save_agent(std::ostream& out, const Agent& agent);
std::unique_ptr<Agent> load_agent(std::istream& in);
void save_agent_file(const std::filesystem::path& path, const Agent& agent);
std::unique_ptr<Agent> load_agent_file(const std::filesystem::path& path);

}  // namespace persim
