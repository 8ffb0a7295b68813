#include "dlvmc/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dlvmc/errors.hpp"

namespace dlvmc {

using nlohmann::json;

namespace {

// Schema skeleton: every known key with its default. Validation walks the
// user document against this tree and rejects anything it does not know.
json default_config() {
  return json{
      {"geometry",
       {{"path", ""}, {"inline", ""}, {"unit", "bohr"}, {"charge", 0}, {"n_up", nullptr}}},
      {"basis", {{"kind", "sto-6g"}}},
      {"features", {{"mode", "local_frames"}}},
      {"embedding",
       {{"variant", "combined"},
        {"iterations", 4},
        {"width_one", 256},
        {"width_aux", 32},
        {"z_emb_dim", 32}}},
      {"wavefunction",
       {{"n_det", 32}, {"det_mode", "dense"}, {"envelope_init", "physical"}}},
      {"sampler",
       {{"n_walkers", 2048},
        {"initial_stepsize", 0.5},
        {"decorrelation_steps", 20},
        {"eval_decorrelation_steps", 1},
        {"burnin_steps", 500},
        {"move_mode", "all_electron"},
        {"adapt_kappa", 0.02},
        {"target_acceptance", 0.5}}},
      {"pretrain", {{"steps", 1000}, {"lr", 1e-3}}},
      {"train",
       {{"steps", 2000},
        {"lr0", 1e-3},
        {"lr_decay_steps", 6000.0},
        {"norm_constraint", 1.0},
        {"clip_window", 5.0},
        {"checkpoint_every", 1000}}},
      {"evaluate", {{"steps", 1000}}},
      {"scf",
       {{"max_iter", 200}, {"density_mix", 0.5}, {"tol_density", 1e-8}, {"tol_energy", 1e-10}}},
      {"seed", 42},
      {"threads", 0},
      {"output_dir", "runs"},
      {"run_name", ""},
  };
}

void check_unknown_keys(const json& doc, const json& schema, const std::string& path) {
  if (!doc.is_object()) return;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key()))
      throw ConfigError("unknown config key: " + key_path);
    if (it.value().is_object()) check_unknown_keys(it.value(), schema.at(it.key()), key_path);
  }
}

void merge_into(json& base, const json& doc) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
      merge_into(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

json parse_override_value(const std::string& text) {
  // JSON literal if it parses, raw string otherwise
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) return json(text);
  return v;
}

void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must be key.path=value, got: " + spec);
  const std::string keypath = spec.substr(0, eq);
  const json value = parse_override_value(spec.substr(eq + 1));
  json* cur = &doc;
  std::istringstream keys(keypath);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) parts.push_back(key);
  if (parts.empty()) throw ConfigError("empty override key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) cur = &((*cur)[parts[i]]);
  (*cur)[parts.back()] = value;
}

template <class T>
T get(const json& doc, const char* section, const char* key) {
  try {
    return doc.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key ") + section + "." + key + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir,
                           const std::vector<std::string>& overrides) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config is not valid JSON");
  json schema = default_config();
  check_unknown_keys(doc, schema, "");
  json merged = schema;
  merge_into(merged, doc);
  for (const auto& o : overrides) apply_override(merged, o);
  check_unknown_keys(merged, schema, "");

  RunConfig cfg;
  cfg.geometry_path = get<std::string>(merged, "geometry", "path");
  cfg.geometry_inline = get<std::string>(merged, "geometry", "inline");
  if (!cfg.geometry_path.empty() && !base_dir.empty()) {
    std::filesystem::path p(cfg.geometry_path);
    if (p.is_relative()) cfg.geometry_path = (std::filesystem::path(base_dir) / p).string();
  }
  const std::string unit = get<std::string>(merged, "geometry", "unit");
  if (unit == "bohr")
    cfg.unit = LengthUnit::Bohr;
  else if (unit == "angstrom")
    cfg.unit = LengthUnit::Angstrom;
  else
    throw ConfigError("geometry.unit must be bohr or angstrom, got: " + unit);
  cfg.charge = get<int>(merged, "geometry", "charge");
  if (!merged.at("geometry").at("n_up").is_null())
    cfg.n_up = get<int>(merged, "geometry", "n_up");

  cfg.basis = basis_kind_from_string(get<std::string>(merged, "basis", "kind"));

  cfg.wf.features.mode = feature_mode_from_string(get<std::string>(merged, "features", "mode"));
  cfg.wf.embedding.variant =
      embedding_variant_from_string(get<std::string>(merged, "embedding", "variant"));
  cfg.wf.embedding.iterations = get<int>(merged, "embedding", "iterations");
  cfg.wf.embedding.width_one = get<int>(merged, "embedding", "width_one");
  cfg.wf.embedding.width_aux = get<int>(merged, "embedding", "width_aux");
  cfg.wf.embedding.z_emb_dim = get<int>(merged, "embedding", "z_emb_dim");
  cfg.wf.n_det = get<int>(merged, "wavefunction", "n_det");
  cfg.wf.det_mode = det_mode_from_string(get<std::string>(merged, "wavefunction", "det_mode"));
  cfg.wf.envelope_init =
      envelope_init_from_string(get<std::string>(merged, "wavefunction", "envelope_init"));

  cfg.n_walkers = get<int>(merged, "sampler", "n_walkers");
  cfg.sampler.initial_stepsize = get<double>(merged, "sampler", "initial_stepsize");
  cfg.sampler.adapt_kappa = get<double>(merged, "sampler", "adapt_kappa");
  cfg.sampler.target_acceptance = get<double>(merged, "sampler", "target_acceptance");
  const std::string mode = get<std::string>(merged, "sampler", "move_mode");
  if (mode == "all_electron")
    cfg.sampler.move_mode = MoveMode::AllElectron;
  else if (mode == "one_electron")
    cfg.sampler.move_mode = MoveMode::OneElectron;
  else
    throw ConfigError("sampler.move_mode must be all_electron or one_electron");
  cfg.burnin_steps = get<int>(merged, "sampler", "burnin_steps");

  cfg.train.n_pretrain = get<int>(merged, "pretrain", "steps");
  cfg.train.pretrain_lr = get<double>(merged, "pretrain", "lr");
  cfg.train.n_opt = get<int>(merged, "train", "steps");
  cfg.train.lr0 = get<double>(merged, "train", "lr0");
  cfg.train.lr_decay_steps = get<double>(merged, "train", "lr_decay_steps");
  cfg.train.norm_constraint = get<double>(merged, "train", "norm_constraint");
  cfg.train.clip_window = get<double>(merged, "train", "clip_window");
  cfg.train.checkpoint_every = get<int>(merged, "train", "checkpoint_every");
  cfg.train.eval_steps = get<int>(merged, "evaluate", "steps");
  cfg.train.n_walkers = cfg.n_walkers;
  cfg.train.decorrelation_steps = get<int>(merged, "sampler", "decorrelation_steps");
  cfg.train.eval_decorrelation_steps = get<int>(merged, "sampler", "eval_decorrelation_steps");
  cfg.train.burnin_steps = cfg.burnin_steps;

  cfg.scf.max_iter = get<int>(merged, "scf", "max_iter");
  cfg.scf.density_mix = get<double>(merged, "scf", "density_mix");
  cfg.scf.tol_density = get<double>(merged, "scf", "tol_density");
  cfg.scf.tol_energy = get<double>(merged, "scf", "tol_energy");

  cfg.seed = merged.at("seed").get<std::uint64_t>();
  cfg.threads = merged.at("threads").get<int>();
  cfg.output_dir = merged.at("output_dir").get<std::string>();
  cfg.run_name = merged.at("run_name").get<std::string>();

  cfg.train.validate();
  if (cfg.geometry_path.empty() && cfg.geometry_inline.empty())
    throw ConfigError("geometry.path or geometry.inline is required");
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string base = std::filesystem::path(path).parent_path().string();
  return parse_run_config(buf.str(), base, overrides);
}

Molecule RunConfig::molecule() const {
  std::string text = geometry_inline;
  if (text.empty()) {
    std::ifstream in(geometry_path);
    if (!in) throw ConfigError("cannot open geometry file: " + geometry_path);
    std::stringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  return parse_geometry(text, unit, charge, n_up);
}

std::string RunConfig::resolved_json() const {
  json j = default_config();
  j["geometry"]["path"] = geometry_path;
  j["geometry"]["inline"] = geometry_inline;
  j["geometry"]["unit"] = unit == LengthUnit::Bohr ? "bohr" : "angstrom";
  j["geometry"]["charge"] = charge;
  if (n_up)
    j["geometry"]["n_up"] = *n_up;
  else
    j["geometry"]["n_up"] = nullptr;
  j["basis"]["kind"] = to_string(basis);
  j["features"]["mode"] = to_string(wf.features.mode);
  j["embedding"]["variant"] = to_string(wf.embedding.variant);
  j["embedding"]["iterations"] = wf.embedding.iterations;
  j["embedding"]["width_one"] = wf.embedding.width_one;
  j["embedding"]["width_aux"] = wf.embedding.width_aux;
  j["embedding"]["z_emb_dim"] = wf.embedding.z_emb_dim;
  j["wavefunction"]["n_det"] = wf.n_det;
  j["wavefunction"]["det_mode"] = to_string(wf.det_mode);
  j["wavefunction"]["envelope_init"] = to_string(wf.envelope_init);
  j["sampler"]["n_walkers"] = n_walkers;
  j["sampler"]["initial_stepsize"] = sampler.initial_stepsize;
  j["sampler"]["decorrelation_steps"] = train.decorrelation_steps;
  j["sampler"]["eval_decorrelation_steps"] = train.eval_decorrelation_steps;
  j["sampler"]["burnin_steps"] = burnin_steps;
  j["sampler"]["move_mode"] =
      sampler.move_mode == MoveMode::AllElectron ? "all_electron" : "one_electron";
  j["sampler"]["adapt_kappa"] = sampler.adapt_kappa;
  j["sampler"]["target_acceptance"] = sampler.target_acceptance;
  j["pretrain"]["steps"] = train.n_pretrain;
  j["pretrain"]["lr"] = train.pretrain_lr;
  j["train"]["steps"] = train.n_opt;
  j["train"]["lr0"] = train.lr0;
  j["train"]["lr_decay_steps"] = train.lr_decay_steps;
  j["train"]["norm_constraint"] = train.norm_constraint;
  j["train"]["clip_window"] = train.clip_window;
  j["train"]["checkpoint_every"] = train.checkpoint_every;
  j["evaluate"]["steps"] = train.eval_steps;
  j["scf"]["max_iter"] = scf.max_iter;
  j["scf"]["density_mix"] = scf.density_mix;
  j["scf"]["tol_density"] = scf.tol_density;
  j["scf"]["tol_energy"] = scf.tol_energy;
  j["seed"] = seed;
  j["threads"] = threads;
  j["output_dir"] = output_dir;
  j["run_name"] = run_name;
  return j.dump(2) + "\n";
}

}  // namespace dlvmc
