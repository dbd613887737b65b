#include "nvsim/workload.hpp"

#include <algorithm>
#include <set>

#include "json_util.hpp"
#include "nvsim/config.hpp"
#include "nvsim/error.hpp"
#include "nvsim/flow.hpp"

namespace nvsim {
namespace {

using detail::Field;
using detail::json;

constexpr std::uint64_t kWorkloadFormatVersion = 1;

bool valid_id(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == ':' || c == '/';
  });
}

std::string identifier(const Field& f) {
  std::string s = f.string();
  if (!valid_id(s)) f.fail(ErrorCode::SyntaxError, "identifiers may only use letters, digits and _-.:/");
  return s;
}

std::vector<std::string> id_list(const Field& f) {
  std::vector<std::string> out;
  const std::size_t n = f.array_size();
  for (std::size_t i = 0; i < n; ++i) out.push_back(identifier(f.index(i)));
  return out;
}

Tier tier_field(const Field& f) {
  auto t = parse_tier(f.string());
  if (!t) f.fail(ErrorCode::SyntaxError, "expected \"local-fs\", \"distributed-fs\" or \"external-fs\"");
  return *t;
}

Bytes size_field(const Field& f) {
  const Bytes b = f.quantity(parse_bytes);
  if (b > flow::kMaxTransferBytes) f.fail(ErrorCode::UnitError, "size exceeds the 100 PB model limit");
  return b;
}

DataSetSpec parse_dataset(const Field& f) {
  DataSetSpec d;
  d.id = identifier(f.at("id"));
  d.size = size_field(f.at("size"));
  d.owner = identifier(f.at("owner"));
  if (auto p = f.maybe("placement")) {
    if (p->value().is_string()) {
      if (p->string() != "external-fs") p->fail(ErrorCode::SyntaxError, "expected \"external-fs\" or {\"node\": n}");
    } else {
      const std::uint64_t n = p->at("node").unsigned_int();
      if (n > 10'000'000) p->at("node").fail(ErrorCode::SyntaxError, "node id out of range");
      d.node = static_cast<int>(n);
    }
  }
  if (auto w = f.maybe("workflow")) d.workflow = identifier(*w);
  return d;
}

IoPhase parse_phase(const Field& f) {
  IoPhase p;
  p.offset = f.at("offset").quantity(parse_duration);
  p.bytes = size_field(f.at("bytes"));
  auto dir = parse_direction(f.at("direction").string());
  if (!dir) f.at("direction").fail(ErrorCode::SyntaxError, "expected \"read\" or \"write\"");
  p.direction = *dir;
  p.tier = tier_field(f.at("tier"));
  if (auto c = f.maybe("checkpoint")) p.checkpoint = c->boolean();
  return p;
}

OutputSpec parse_output(const Field& f) {
  OutputSpec o;
  o.id = identifier(f.at("id"));
  o.bytes = size_field(f.at("bytes"));
  o.tier = tier_field(f.at("tier"));
  if (auto s = f.maybe("stage_out")) o.stage_out = s->boolean();
  return o;
}

JobSpec parse_job(const Field& f) {
  JobSpec j;
  j.job_id = identifier(f.at("job_id"));
  j.submit_time = kSimEpoch + f.at("submit_time").quantity(parse_duration);
  if (auto w = f.maybe("workflow_id")) j.workflow_id = identifier(*w);
  j.owner = identifier(f.at("owner"));
  const std::uint64_t k = f.at("nodes_requested").unsigned_int();
  if (k == 0 || k > 10'000'000) f.at("nodes_requested").fail(ErrorCode::SyntaxError, "must be between 1 and 10^7");
  j.nodes_requested = static_cast<std::uint32_t>(k);
  j.bapm_bytes_per_node = f.at("bapm_bytes_per_node").quantity(parse_bytes);
  j.compute_seconds = f.at("compute_seconds").quantity(parse_duration);
  j.walltime_limit = f.at("walltime_limit").quantity(parse_duration);
  if (auto m = f.maybe("required_mode")) {
    auto mode = parse_memory_mode(m->string());
    if (!mode) m->fail(ErrorCode::SyntaxError, "expected \"SLM\" or \"DLM\"");
    j.required_mode = *mode;
  }
  if (auto h = f.maybe("dlm_hit_rate")) j.dlm_hit_rate = h->number();
  if (auto r = f.maybe("retain_outputs")) j.retain_outputs = r->boolean();
  if (auto s = f.maybe("stage_inputs")) {
    auto mode = parse_stage_mode(s->string());
    if (!mode) s->fail(ErrorCode::SyntaxError, "expected \"none\", \"local-fs\" or \"distributed-fs\"");
    j.stage_inputs = *mode;
  }
  if (auto in = f.maybe("inputs")) j.inputs = id_list(*in);
  if (auto ph = f.maybe("io_phases")) {
    for (std::size_t i = 0, n = ph->array_size(); i < n; ++i) j.io_phases.push_back(parse_phase(ph->index(i)));
  }
  if (auto out = f.maybe("outputs")) {
    for (std::size_t i = 0, n = out->array_size(); i < n; ++i) j.outputs.push_back(parse_output(out->index(i)));
  }
  return j;
}

WorkflowSpec parse_workflow(const Field& f) {
  WorkflowSpec w;
  w.id = identifier(f.at("id"));
  if (auto t = f.maybe("retention_ttl")) w.retention_ttl = t->quantity(parse_duration);
  if (auto s = f.maybe("shared_datasets")) w.shared_datasets = id_list(*s);
  if (auto d = f.maybe("dependencies")) {
    if (!d->value().is_object()) d->fail(ErrorCode::SyntaxError, "expected an object mapping job ids to lists");
    for (const auto& [key, value] : d->value().items()) {
      const Field entry(value, d->path() + "." + key);
      if (!valid_id(key)) entry.fail(ErrorCode::SyntaxError, "bad job id");
      w.dependencies[key] = id_list(entry);
    }
  }
  return w;
}

[[noreturn]] void fail_at(ErrorCode code, const std::string& path, std::string_view why) {
  throw SimError(code, fmt::format("{}: {}", path, why));
}

json duration_json(SimDuration d) { return format_duration(d); }

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::read ? "read" : "write"; }

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::local_fs: return "local-fs";
    case Tier::distributed_fs: return "distributed-fs";
    case Tier::external_fs: return "external-fs";
  }
  return "?";
}

std::string_view to_string(StageMode m) {
  switch (m) {
    case StageMode::none: return "none";
    case StageMode::local_fs: return "local-fs";
    case StageMode::distributed_fs: return "distributed-fs";
  }
  return "?";
}

std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "read") return Direction::read;
  if (s == "write") return Direction::write;
  return std::nullopt;
}

std::optional<Tier> parse_tier(std::string_view s) {
  if (s == "local-fs") return Tier::local_fs;
  if (s == "distributed-fs") return Tier::distributed_fs;
  if (s == "external-fs") return Tier::external_fs;
  return std::nullopt;
}

std::optional<StageMode> parse_stage_mode(std::string_view s) {
  if (s == "none") return StageMode::none;
  if (s == "local-fs") return StageMode::local_fs;
  if (s == "distributed-fs") return StageMode::distributed_fs;
  return std::nullopt;
}

std::map<std::string, std::size_t> output_producers(const WorkloadSpec& spec) {
  std::map<std::string, std::size_t> out;
  for (std::size_t j = 0; j < spec.jobs.size(); ++j) {
    for (const OutputSpec& o : spec.jobs[j].outputs) out.emplace(o.id, j);
  }
  return out;
}

Bytes declared_io_bytes(const WorkloadSpec& spec, const JobSpec& job) {
  std::map<std::string, Bytes> sizes;
  for (const DataSetSpec& d : spec.datasets) sizes[d.id] = d.size;
  for (const JobSpec& j : spec.jobs) {
    for (const OutputSpec& o : j.outputs) sizes[o.id] = o.bytes;
  }
  Bytes total = 0;
  for (const std::string& in : job.inputs) total += sizes.at(in);
  for (const IoPhase& p : job.io_phases) total += p.bytes;
  for (const OutputSpec& o : job.outputs) total += o.bytes;
  return total;
}

void validate_workload(const WorkloadSpec& spec) {
  std::set<std::string> dataset_ids;
  for (std::size_t i = 0; i < spec.datasets.size(); ++i) {
    if (!dataset_ids.insert(spec.datasets[i].id).second) {
      fail_at(ErrorCode::SyntaxError, fmt::format("datasets[{}].id", i), "duplicate dataset id");
    }
  }
  std::set<std::string> job_ids;
  for (std::size_t j = 0; j < spec.jobs.size(); ++j) {
    const JobSpec& job = spec.jobs[j];
    const std::string path = fmt::format("jobs[{}]", j);
    if (!job_ids.insert(job.job_id).second) fail_at(ErrorCode::SyntaxError, path + ".job_id", "duplicate job id");
    for (std::size_t o = 0; o < job.outputs.size(); ++o) {
      if (!dataset_ids.insert(job.outputs[o].id).second) {
        fail_at(ErrorCode::SyntaxError, fmt::format("{}.outputs[{}].id", path, o), "dataset id already declared");
      }
    }
  }
  std::set<std::string> workflow_ids;
  for (std::size_t w = 0; w < spec.workflows.size(); ++w) {
    if (!workflow_ids.insert(spec.workflows[w].id).second) {
      fail_at(ErrorCode::SyntaxError, fmt::format("workflows[{}].id", w), "duplicate workflow id");
    }
  }

  std::map<std::string, std::size_t> job_index;
  for (std::size_t j = 0; j < spec.jobs.size(); ++j) job_index[spec.jobs[j].job_id] = j;

  for (std::size_t i = 0; i < spec.datasets.size(); ++i) {
    const DataSetSpec& d = spec.datasets[i];
    if (!d.workflow.empty() && !workflow_ids.contains(d.workflow)) {
      fail_at(ErrorCode::SyntaxError, fmt::format("datasets[{}].workflow", i), "unknown workflow");
    }
  }

  for (std::size_t j = 0; j < spec.jobs.size(); ++j) {
    const JobSpec& job = spec.jobs[j];
    const std::string path = fmt::format("jobs[{}]", j);
    if (!job.workflow_id.empty() && !workflow_ids.contains(job.workflow_id)) {
      fail_at(ErrorCode::SyntaxError, path + ".workflow_id", "unknown workflow");
    }
    if (job.compute_seconds.count() < 0) fail_at(ErrorCode::SyntaxError, path + ".compute_seconds", "negative");
    if (job.walltime_limit < job.compute_seconds) {
      fail_at(ErrorCode::SyntaxError, path + ".walltime_limit", "must be at least compute_seconds");
    }
    if (!(job.dlm_hit_rate >= 0.0 && job.dlm_hit_rate <= 1.0)) {
      fail_at(ErrorCode::HitRateOutOfRange, path + ".dlm_hit_rate", "must lie in [0, 1]");
    }
    for (std::size_t i = 0; i < job.inputs.size(); ++i) {
      if (!dataset_ids.contains(job.inputs[i])) {
        fail_at(ErrorCode::UnknownDataset, fmt::format("{}.inputs[{}]", path, i),
                fmt::format("unknown dataset '{}'", job.inputs[i]));
      }
    }
    for (std::size_t p = 0; p < job.io_phases.size(); ++p) {
      if (job.io_phases[p].offset > job.compute_seconds) {
        fail_at(ErrorCode::SyntaxError, fmt::format("{}.io_phases[{}].offset", path, p), "offset beyond compute_seconds");
      }
    }
  }

  for (std::size_t w = 0; w < spec.workflows.size(); ++w) {
    const WorkflowSpec& wf = spec.workflows[w];
    const std::string path = fmt::format("workflows[{}]", w);
    for (std::size_t i = 0; i < wf.shared_datasets.size(); ++i) {
      if (!dataset_ids.contains(wf.shared_datasets[i])) {
        fail_at(ErrorCode::UnknownDataset, fmt::format("{}.shared_datasets[{}]", path, i),
                fmt::format("unknown dataset '{}'", wf.shared_datasets[i]));
      }
    }
    for (const auto& [job, preds] : wf.dependencies) {
      auto it = job_index.find(job);
      if (it == job_index.end() || spec.jobs[it->second].workflow_id != wf.id) {
        fail_at(ErrorCode::SyntaxError, fmt::format("{}.dependencies.{}", path, job), "not a job of this workflow");
      }
      for (std::size_t i = 0; i < preds.size(); ++i) {
        auto p = job_index.find(preds[i]);
        if (p == job_index.end() || spec.jobs[p->second].workflow_id != wf.id) {
          fail_at(ErrorCode::SyntaxError, fmt::format("{}.dependencies.{}[{}]", path, job, i),
                  fmt::format("'{}' is not a job of this workflow", preds[i]));
        }
      }
    }
    // Depth-first search for a back edge.
    std::map<std::string, int> color;
    std::vector<std::string> stack;
    auto visit = [&](auto&& self, const std::string& node) -> void {
      color[node] = 1;
      stack.push_back(node);
      if (auto it = wf.dependencies.find(node); it != wf.dependencies.end()) {
        for (const std::string& pred : it->second) {
          if (color[pred] == 1) {
            std::string cycle;
            auto from = std::find(stack.begin(), stack.end(), pred);
            for (auto s = from; s != stack.end(); ++s) cycle += *s + " -> ";
            cycle += pred;
            fail_at(ErrorCode::CyclicWorkflow, path + ".dependencies", fmt::format("cycle {}", cycle));
          }
          if (color[pred] == 0) self(self, pred);
        }
      }
      stack.pop_back();
      color[node] = 2;
    };
    for (const auto& [job, preds] : wf.dependencies) {
      if (color[job] == 0) visit(visit, job);
    }
  }

  // A job may only consume another job's output if that job precedes it.
  const auto producers = output_producers(spec);
  std::map<std::string, const WorkflowSpec*> workflows;
  for (const WorkflowSpec& wf : spec.workflows) workflows[wf.id] = &wf;
  for (std::size_t j = 0; j < spec.jobs.size(); ++j) {
    const JobSpec& job = spec.jobs[j];
    for (std::size_t i = 0; i < job.inputs.size(); ++i) {
      auto prod = producers.find(job.inputs[i]);
      if (prod == producers.end()) continue;
      const JobSpec& producer = spec.jobs[prod->second];
      bool ok = false;
      if (!job.workflow_id.empty() && producer.workflow_id == job.workflow_id) {
        const WorkflowSpec& wf = *workflows.at(job.workflow_id);
        std::set<std::string> seen;
        std::vector<std::string> todo{job.job_id};
        while (!todo.empty() && !ok) {
          const std::string cur = todo.back();
          todo.pop_back();
          auto it = wf.dependencies.find(cur);
          if (it == wf.dependencies.end()) continue;
          for (const std::string& p : it->second) {
            if (p == producer.job_id) ok = true;
            if (seen.insert(p).second) todo.push_back(p);
          }
        }
      }
      if (!ok) {
        fail_at(ErrorCode::SyntaxError, fmt::format("jobs[{}].inputs[{}]", j, i),
                fmt::format("dataset '{}' is produced by job '{}', which is not a workflow predecessor",
                            job.inputs[i], producer.job_id));
      }
    }
  }
}

void validate_workload_against(const WorkloadSpec& spec, const ClusterSpec& cluster) {
  std::map<int, Bytes> on_node;
  unsigned __int128 external = 0;
  for (std::size_t i = 0; i < spec.datasets.size(); ++i) {
    const DataSetSpec& d = spec.datasets[i];
    const std::string path = fmt::format("datasets[{}].placement", i);
    if (!d.node) {
      external += d.size;
      continue;
    }
    if (*d.node < 0 || static_cast<std::size_t>(*d.node) >= cluster.nodes.size()) {
      fail_at(ErrorCode::SyntaxError, path, fmt::format("node {} does not exist", *d.node));
    }
    const NodeSpec& n = cluster.nodes[*d.node];
    if (n.initial_mode != MemoryMode::SLM) {
      fail_at(ErrorCode::InsufficientCapacity, path, fmt::format("node {} starts in DLM and holds no persistent data", *d.node));
    }
    on_node[*d.node] += d.size;
    if (on_node[*d.node] > n.bapm_bytes()) {
      fail_at(ErrorCode::InsufficientCapacity, path, fmt::format("initial data exceeds node {} B-APM", *d.node));
    }
  }
  if (external > cluster.external_fs_capacity) {
    throw SimError(ErrorCode::InsufficientCapacity, "datasets: initial data exceeds the external file system capacity");
  }
}

WorkloadSpec parse_workload(std::string_view json_text) {
  const json doc = detail::parse_json_text(json_text, "workload");
  const Field root(doc, "");
  if (!doc.is_object()) root.fail(ErrorCode::SyntaxError, "workload must be a JSON object");
  const Field version = root.at("format_version");
  if (version.unsigned_int() != kWorkloadFormatVersion) {
    version.fail(ErrorCode::SyntaxError, fmt::format("unsupported format_version (expected {})", kWorkloadFormatVersion));
  }

  WorkloadSpec spec;
  if (auto ds = root.maybe("datasets")) {
    for (std::size_t i = 0, n = ds->array_size(); i < n; ++i) spec.datasets.push_back(parse_dataset(ds->index(i)));
  }
  if (auto gs = root.maybe("grants")) {
    for (std::size_t i = 0, n = gs->array_size(); i < n; ++i) {
      const Field g = gs->index(i);
      spec.grants.push_back(Grant{identifier(g.at("owner")), id_list(g.at("principals"))});
    }
  }
  if (auto ws = root.maybe("workflows")) {
    for (std::size_t i = 0, n = ws->array_size(); i < n; ++i) spec.workflows.push_back(parse_workflow(ws->index(i)));
  }
  if (auto js = root.maybe("jobs")) {
    for (std::size_t i = 0, n = js->array_size(); i < n; ++i) spec.jobs.push_back(parse_job(js->index(i)));
  }
  validate_workload(spec);
  return spec;
}

WorkloadSpec load_workload(const std::filesystem::path& path) { return parse_workload(read_text_file(path)); }

std::string workload_to_json(const WorkloadSpec& spec) {
  json datasets = json::array();
  for (const DataSetSpec& d : spec.datasets) {
    json e{{"id", d.id}, {"size", format_bytes(d.size)}, {"owner", d.owner}};
    if (d.node) {
      e["placement"] = json{{"node", *d.node}};
    } else {
      e["placement"] = "external-fs";
    }
    if (!d.workflow.empty()) e["workflow"] = d.workflow;
    datasets.push_back(std::move(e));
  }
  json grants = json::array();
  for (const Grant& g : spec.grants) grants.push_back(json{{"owner", g.owner}, {"principals", g.principals}});
  json workflows = json::array();
  for (const WorkflowSpec& w : spec.workflows) {
    json deps = json::object();
    for (const auto& [job, preds] : w.dependencies) deps[job] = preds;
    workflows.push_back(json{{"id", w.id},
                             {"retention_ttl", duration_json(w.retention_ttl)},
                             {"shared_datasets", w.shared_datasets},
                             {"dependencies", std::move(deps)}});
  }
  json jobs = json::array();
  for (const JobSpec& j : spec.jobs) {
    json phases = json::array();
    for (const IoPhase& p : j.io_phases) {
      phases.push_back(json{{"offset", duration_json(p.offset)},
                            {"bytes", format_bytes(p.bytes)},
                            {"direction", std::string(to_string(p.direction))},
                            {"tier", std::string(to_string(p.tier))},
                            {"checkpoint", p.checkpoint}});
    }
    json outputs = json::array();
    for (const OutputSpec& o : j.outputs) {
      outputs.push_back(json{{"id", o.id},
                             {"bytes", format_bytes(o.bytes)},
                             {"tier", std::string(to_string(o.tier))},
                             {"stage_out", o.stage_out}});
    }
    json e{{"job_id", j.job_id},
           {"submit_time", duration_json(j.submit_time.time_since_epoch())},
           {"owner", j.owner},
           {"nodes_requested", j.nodes_requested},
           {"bapm_bytes_per_node", format_bytes(j.bapm_bytes_per_node)},
           {"compute_seconds", duration_json(j.compute_seconds)},
           {"walltime_limit", duration_json(j.walltime_limit)},
           {"required_mode", std::string(to_string(j.required_mode))},
           {"dlm_hit_rate", j.dlm_hit_rate},
           {"retain_outputs", j.retain_outputs},
           {"stage_inputs", std::string(to_string(j.stage_inputs))},
           {"inputs", j.inputs},
           {"io_phases", std::move(phases)},
           {"outputs", std::move(outputs)}};
    if (!j.workflow_id.empty()) e["workflow_id"] = j.workflow_id;
    jobs.push_back(std::move(e));
  }
  json doc{{"format_version", kWorkloadFormatVersion},
           {"datasets", std::move(datasets)},
           {"grants", std::move(grants)},
           {"workflows", std::move(workflows)},
           {"jobs", std::move(jobs)}};
  return doc.dump(2) + "\n";
}

}  // namespace nvsim
