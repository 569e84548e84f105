#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "bevcv/benchmark.hpp"
#include "bevcv/complexity.hpp"
#include "bevcv/config.hpp"
#include "bevcv/error.hpp"
#include "bevcv/eval.hpp"
#include "bevcv/formats.hpp"
#include "bevcv/imaging.hpp"
#include "bevcv/index.hpp"
#include "bevcv/manifest.hpp"
#include "bevcv/model.hpp"
#include "bevcv/parallel.hpp"
#include "bevcv/synthetic.hpp"
#include "bevcv/trainer.hpp"
#include "bevcv/version.hpp"

namespace bevcv::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Effective configuration: defaults, then the --config file, then --fov.
// The FOV override is applied to the JSON before parsing so that derived
// intrinsics follow it unless the file pins them.
RunConfig effective_config(const std::string& path,
                           std::optional<double> fov) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!fov) return parse_config(ss.str());
    try {
      j = json::parse(ss.str());
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("config must be a JSON object");
  }
  if (fov) {
    if (!j.contains("crop")) j["crop"] = json::object();
    if (!j["crop"].is_object()) throw ParseError("'crop' must be a JSON object");
    j["crop"]["fov_deg"] = *fov;
  }
  return parse_config(j.dump());
}

void write_text(const std::string& path, const std::string& text,
                std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::vector<double> parse_number_list(const std::string& text,
                                      const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::invalid_argument(item);
      }
    } catch (const std::logic_error&) {
      throw InvalidArgument(std::string(flag) + ": '" + item +
                            "' is not a number");
    }
  }
  if (out.empty()) throw InvalidArgument(std::string(flag) + " is empty");
  return out;
}

std::string format_similarity(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", s);
  return buf;
}

std::string retrieval_csv(const EmbeddingSet& queries,
                          const std::vector<RetrievalResult>& results) {
  std::string csv = "query_id,rank,id,similarity\n";
  for (std::size_t q = 0; q < results.size(); ++q) {
    for (std::size_t r = 0; r < results[q].size(); ++r) {
      csv += std::to_string(queries.ids[q]) + "," + std::to_string(r + 1) +
             "," + std::to_string(results[q][r].id) + "," +
             format_similarity(results[q][r].similarity) + "\n";
    }
  }
  return csv;
}

// "query_id,truth_id" CSV (header optional) reordered to the query order.
std::vector<std::uint64_t> read_truth(const std::string& path,
                                      const EmbeddingSet& queries) {
  if (path.empty()) return queries.ids;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open truth file '" + path + "'");
  std::map<std::uint64_t, std::uint64_t> truth;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (lineno == 1 && line.rfind("query_id", 0) == 0)) {
      continue;
    }
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument(line);
      std::size_t a = 0, b = 0;
      const auto q = std::stoull(line.substr(0, comma), &a);
      const auto t = std::stoull(line.substr(comma + 1), &b);
      if (a != comma || b != line.size() - comma - 1) {
        throw std::invalid_argument(line);
      }
      if (!truth.emplace(q, t).second) {
        throw DuplicateId("query " + std::to_string(q) + " repeated in " +
                          path);
      }
    } catch (const std::logic_error&) {
      throw ParseError("expected 'query_id,truth_id' in " + path, lineno);
    }
  }
  std::vector<std::uint64_t> out;
  for (auto id : queries.ids) {
    auto it = truth.find(id);
    if (it == truth.end()) {
      throw MissingTruth("no truth id for query " + std::to_string(id));
    }
    out.push_back(it->second);
  }
  return out;
}

json report_json(const RecallReport& r) {
  return {{"queries", r.queries},     {"index_size", r.index_size},
          {"top1pct_k", r.top_percent_k}, {"r1", r.r1},
          {"r5", r.r5},               {"r10", r.r10},
          {"r1pct", r.r1pct}};
}

void add_pair_tensors(LayerWeights& w, std::size_t i, const FeaturePair& p) {
  w.insert("pair." + std::to_string(i) + ".pov", p.pov);
  w.insert("pair." + std::to_string(i) + ".aer", p.aer);
}

std::vector<FeaturePair> read_feature_pairs(const std::string& path) {
  const LayerWeights w = read_weights(path);
  std::vector<FeaturePair> pairs;
  for (std::size_t i = 0;; ++i) {
    const std::string p = "pair." + std::to_string(i);
    if (!w.contains(p + ".pov")) break;
    pairs.push_back({w.get(p + ".pov"), w.get(p + ".aer")});
  }
  if (pairs.size() * 2 != w.size()) {
    throw MalformedFile("feature file '" + path +
                        "' must hold only pair.<i>.pov / pair.<i>.aer tensors "
                        "numbered from 0");
  }
  return pairs;
}

SyntheticSpec synthetic_spec(std::uint64_t world_seed, const RunConfig& cfg) {
  SyntheticSpec s;
  s.world_seed = world_seed;
  s.fov_deg = cfg.crop.fov_deg;
  s.pov_channels = cfg.net.psi_channels.back();
  s.aer_channels = cfg.net.unet_channels.back();
  return s;
}

}  // namespace

std::string version_text() {
  std::string s = std::string("bevcv ") + kVersion + "\n";
  s += "BEVC embedding format version " +
       std::to_string(kEmbeddingFormatVersion) + "\n";
  s += "BVWT weights format version " + std::to_string(kWeightsFormatVersion) +
       "\n";
  s += "default config:\n" + config_to_json(default_config()) + "\n";
  return s;
}

std::string version_json() {
  ojson j;
  j["version"] = kVersion;
  j["formats"] = {{"BEVC", kEmbeddingFormatVersion},
                  {"BVWT", kWeightsFormatVersion}};
  j["default_config"] = ojson::parse(config_to_json(default_config()));
  return j.dump(2) + "\n";
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"BEV-CV cross-view geo-localisation toolkit", "bevcv"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // Shared option storage; each subcommand binds what it needs.
  std::string config_path, manifest, weights, out_path, branch = "pov",
                                                       index_path, queries_path,
                                                       truth_path, features,
                                                       loss_csv, offsets_text,
                                                       dims_text, sizes_text,
                                                       embeddings_path;
  std::optional<double> fov;
  double yaw_offset = 0.0;
  std::size_t k = 10, leaf_size = 16, items = 64, n_queries = 100, synthetic = 0;
  std::uint64_t seed = 0, scene_seed = 0, first_id = 0;
  std::int64_t ref_dim = 768;
  int jobs = 1;
  bool as_json = false, as_csv = false, normalize = false, brute = false;

  const auto add_config = [&](CLI::App* c) {
    c->add_option("--config", config_path, "JSON run configuration")
        ->check(CLI::ExistingFile);
  };
  const auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", seed, "random seed")->required();
  };
  const auto add_jobs = [&](CLI::App* c) {
    c->add_option("--jobs", jobs, "worker threads")
        ->check(CLI::Range(1, 1024));
  };

  auto* version = app.add_subcommand("version", "print version information");
  version->add_flag("--json", as_json, "machine-readable output");

  auto* config = app.add_subcommand("config", "print the effective configuration");
  add_config(config);
  config->add_option("--fov", fov, "crop field of view in degrees");
  config->add_option("--out", out_path, "output file (default stdout)");

  auto* init = app.add_subcommand("init-weights", "write seeded model weights");
  add_config(init);
  add_seed(init);
  init->add_option("--out", out_path, "weights file")->required();

  auto* crop = app.add_subcommand("crop", "write limited-FOV crops as PPM");
  add_config(crop);
  crop->add_option("--manifest", manifest, "JSONL manifest")->required();
  crop->add_option("--out", out_path, "output directory")->required();
  crop->add_option("--fov", fov, "crop field of view in degrees");
  crop->add_option("--yaw-offset", yaw_offset, "added to every heading");

  auto* embed = app.add_subcommand("embed", "embed manifest images");
  add_config(embed);
  add_jobs(embed);
  embed->add_option("--manifest", manifest, "JSONL manifest")->required();
  embed->add_option("--weights", weights, "model weights")->required();
  embed->add_option("--branch", branch, "pov or aerial")
      ->check(CLI::IsMember({"pov", "aerial"}));
  embed->add_option("--out", out_path, "embedding file")->required();
  embed->add_option("--fov", fov, "crop field of view in degrees");
  embed->add_option("--yaw-offset", yaw_offset, "added to every heading");

  auto* build = app.add_subcommand("build-index", "validate and build an index");
  build->add_option("--embeddings", embeddings_path, "embedding file")
      ->required();
  build->add_option("--out", out_path, "persisted (normalised) index file");
  build->add_option("--leaf-size", leaf_size, "KD-tree leaf size")
      ->check(CLI::PositiveNumber);
  build->add_flag("--normalize", normalize, "L2-normalise rows");
  build->add_flag("--json", as_json, "machine-readable output");

  auto* query = app.add_subcommand("query", "top-k retrieval as CSV");
  query->add_option("--index", index_path, "indexed embedding file")->required();
  query->add_option("--queries", queries_path, "query embedding file")
      ->required();
  query->add_option("--k", k, "results per query")->check(CLI::PositiveNumber);
  query->add_option("--out", out_path, "CSV output (default stdout)");
  query->add_flag("--brute-force", brute, "use the full-scan oracle");

  auto* evaluate = app.add_subcommand("evaluate", "recall@K report");
  add_jobs(evaluate);
  evaluate->add_option("--index", index_path, "indexed embedding file")
      ->required();
  evaluate->add_option("--queries", queries_path, "query embedding file")
      ->required();
  evaluate->add_option("--truth", truth_path,
                       "query_id,truth_id CSV (default: truth id = query id)");
  evaluate->add_option("--out", out_path, "output file (default stdout)");
  evaluate->add_flag("--json", as_json, "JSON output");
  evaluate->add_flag("--csv", as_csv, "CSV output");

  auto* train = app.add_subcommand("train-head", "train both projection heads");
  add_config(train);
  add_seed(train);
  train->add_option("--features", features, "feature pair file (BVWT)")
      ->required();
  train->add_option("--weights", weights,
                    "base weights whose heads are replaced");
  train->add_option("--out", out_path, "output weights")->required();
  train->add_option("--loss-csv", loss_csv, "per-epoch loss trace");

  auto* synth = app.add_subcommand("synth-features",
                                   "write synthetic feature pairs");
  add_config(synth);
  add_seed(synth);
  synth->add_option("--scene-seed", scene_seed, "seed of the scene sample")
      ->required();
  synth->add_option("--items", items, "number of pairs")
      ->check(CLI::PositiveNumber);
  synth->add_option("--first-id", first_id, "id of the first scene");
  synth->add_option("--yaw-offset", yaw_offset, "heading offset of POV crops");
  synth->add_option("--out", out_path, "feature pair file")->required();

  auto* sweep = app.add_subcommand("sweep-offset", "recall vs heading offset");
  add_config(sweep);
  add_seed(sweep);
  add_jobs(sweep);
  sweep->add_option("--weights", weights, "model or head weights")->required();
  sweep->add_option("--offsets", offsets_text, "comma-separated degrees")
      ->required();
  sweep->add_option("--fov", fov, "crop field of view in degrees");
  sweep->add_option("--out", out_path, "CSV output (default stdout)");
  auto* src_manifest =
      sweep->add_option("--manifest", manifest, "JSONL manifest (full pipeline)");
  auto* src_synth = sweep->add_option(
      "--synthetic", synthetic, "use N synthetic scenes instead of a manifest");
  src_manifest->excludes(src_synth);
  sweep->add_option("--scene-seed", scene_seed, "synthetic scene sample seed");
  sweep->add_option("--first-id", first_id, "id of the first synthetic scene");

  auto* complexity = app.add_subcommand("report-complexity",
                                        "parameter / FLOP accounting");
  add_config(complexity);
  complexity->add_option("--ref-dim", ref_dim, "reference embedding dim")
      ->check(CLI::PositiveNumber);
  complexity->add_option("--out", out_path, "output file (default stdout)");
  complexity->add_flag("--json", as_json, "JSON output");
  complexity->add_flag("--csv", as_csv, "per-layer CSV");

  auto* bench = app.add_subcommand("benchmark", "KD-tree vs brute-force timing");
  add_seed(bench);
  bench->add_option("--dims", dims_text, "comma-separated dims")
      ->default_val("128,512,768");
  bench->add_option("--sizes", sizes_text, "comma-separated index sizes")
      ->default_val("1000");
  bench->add_option("--queries", n_queries, "queries per configuration")
      ->check(CLI::PositiveNumber);
  bench->add_option("--k", k, "results per query")->check(CLI::PositiveNumber);
  bench->add_option("--out", out_path, "CSV output (default stdout)");

  std::vector<const char*> argv{"bevcv"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kValidation;
  }

  try {
    if (*version) {
      out << (as_json ? version_json() : version_text());
    } else if (*config) {
      write_text(out_path, config_to_json(effective_config(config_path, fov)) + "\n",
                 out);
    } else if (*init) {
      RunConfig cfg = effective_config(config_path, std::nullopt);
      write_weights(out_path, init_model_weights(cfg.model_spec(), seed));
    } else if (*crop) {
      const RunConfig cfg = effective_config(config_path, fov);
      const auto entries = parse_manifest(manifest);
      fs::create_directories(out_path);
      for (const auto& e : entries) {
        const ImageRaster pano =
            load_image(resolve_manifest_path(manifest, e.pov_path));
        const ImageRaster c =
            fov_crop(pano, {cfg.crop.fov_deg, e.yaw_deg + yaw_offset});
        write_file_bytes(fs::path(out_path) / (std::to_string(e.id) + ".ppm"),
                         encode_ppm(c));
      }
    } else if (*embed) {
      const RunConfig cfg = effective_config(config_path, fov);
      const auto entries = parse_manifest(manifest);
      const Pipeline pipe(cfg.model_spec(), read_weights(weights));
      const Branch br = parse_branch(branch);
      std::vector<std::vector<float>> rows(entries.size());
      parallel_for(entries.size(), jobs, [&](std::size_t i) {
        const auto& e = entries[i];
        if (br == Branch::kPov) {
          rows[i] = pipe.embed_pov(load_image(resolve_manifest_path(manifest, e.pov_path)),
                                   {cfg.crop.fov_deg, e.yaw_deg + yaw_offset})
                        .values;
        } else {
          rows[i] = pipe.embed_aerial(load_image(
                                          resolve_manifest_path(manifest, e.aerial_path)))
                        .values;
        }
      });
      EmbeddingSet set;
      set.dim = static_cast<std::size_t>(cfg.net.embedding_dim);
      for (std::size_t i = 0; i < entries.size(); ++i) {
        set.append(entries[i].id, rows[i]);
      }
      write_embeddings(out_path, set);
    } else if (*build) {
      IndexOptions opt;
      opt.leaf_size = leaf_size;
      opt.normalize = normalize;
      const auto index = EmbeddingIndex::build(read_embeddings(embeddings_path), opt);
      if (!index.check_structure()) {
        throw InvalidArgument("index structure check failed");
      }
      if (!out_path.empty()) write_embeddings(out_path, index.embeddings());
      if (as_json) {
        out << json{{"size", index.size()},       {"dim", index.dim()},
                    {"nodes", index.node_count()}, {"leaves", index.leaf_count()},
                    {"depth", index.depth()}}
                   .dump()
            << "\n";
      } else {
        out << "size   " << index.size() << "\ndim    " << index.dim()
            << "\nnodes  " << index.node_count() << "\nleaves "
            << index.leaf_count() << "\ndepth  " << index.depth() << "\n";
      }
    } else if (*query) {
      const auto index = EmbeddingIndex::build(read_embeddings(index_path));
      const EmbeddingSet queries = read_embeddings(queries_path);
      queries.validate();
      std::vector<RetrievalResult> results(queries.size());
      for (std::size_t q = 0; q < queries.size(); ++q) {
        results[q] = brute ? brute_force_topk(index.embeddings(), queries.row(q), k)
                           : index.query(queries.row(q), k);
      }
      write_text(out_path, retrieval_csv(queries, results), out);
    } else if (*evaluate) {
      const auto index = EmbeddingIndex::build(read_embeddings(index_path));
      const EmbeddingSet queries = read_embeddings(queries_path);
      const auto truth = read_truth(truth_path, queries);
      const RecallReport r = evaluate_retrieval(index, queries, truth, jobs);
      std::string text;
      if (as_json) {
        text = report_json(r).dump(2) + "\n";
      } else if (as_csv) {
        text = recall_report_csv_header() + "\n" + recall_report_csv_row(r) + "\n";
      } else {
        text = format_recall_report(r);
      }
      write_text(out_path, text, out);
    } else if (*train) {
      RunConfig cfg = effective_config(config_path, std::nullopt);
      cfg.trainer.seed = seed;
      const auto pairs = read_feature_pairs(features);
      TrainResult r = train_heads(pairs, cfg.trainer, cfg.loss,
                                  static_cast<std::size_t>(cfg.net.embedding_dim));
      LayerWeights result;
      if (!weights.empty()) {
        result = read_weights(weights);
        for (const auto& e : r.weights.entries()) result.set(e.name, e.tensor);
      } else {
        result = std::move(r.weights);
      }
      write_weights(out_path, result);
      if (!loss_csv.empty()) write_loss_csv(loss_csv, r);
    } else if (*synth) {
      const RunConfig cfg = effective_config(config_path, std::nullopt);
      const SyntheticWorld world(synthetic_spec(seed, cfg));
      const auto scenes = world.make_scenes(items, scene_seed, first_id);
      LayerWeights w;
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        add_pair_tensors(w, i,
                         {world.pov_feature(scenes[i], yaw_offset),
                          world.aerial_feature(scenes[i])});
      }
      write_weights(out_path, w);
    } else if (*sweep) {
      const RunConfig cfg = effective_config(config_path, fov);
      const auto offsets = parse_number_list(offsets_text, "--offsets");
      const LayerWeights w = read_weights(weights);
      std::vector<OffsetRow> rows;
      if (synthetic > 0) {
        const SyntheticWorld world(synthetic_spec(seed, cfg));
        const auto scenes = world.make_scenes(synthetic, scene_seed, first_id);
        const auto sr = synthetic_retrieval(world, scenes, w);
        rows = offset_sweep(sr.embed_query, scenes.size(), sr.gallery, sr.truth,
                            offsets, seed, jobs);
      } else {
        if (manifest.empty()) {
          throw InvalidArgument("sweep-offset needs --manifest or --synthetic");
        }
        const auto entries = parse_manifest(manifest);
        const Pipeline pipe(cfg.model_spec(), w);
        const std::size_t n = entries.size();
        std::vector<std::vector<float>> aerial(n);
        parallel_for(n, jobs, [&](std::size_t i) {
          aerial[i] = pipe.embed_aerial(load_image(resolve_manifest_path(
                                            manifest, entries[i].aerial_path)))
                          .values;
        });
        EmbeddingSet gallery;
        gallery.dim = static_cast<std::size_t>(cfg.net.embedding_dim);
        std::vector<std::uint64_t> truth;
        for (std::size_t i = 0; i < n; ++i) {
          gallery.append(entries[i].id, aerial[i]);
          truth.push_back(entries[i].id);
        }
        const QueryEmbedder embedder = [&](std::size_t i, double off) {
          const auto& e = entries[i];
          return pipe
              .embed_pov(load_image(resolve_manifest_path(manifest, e.pov_path)),
                         {cfg.crop.fov_deg, e.yaw_deg + off})
              .values;
        };
        rows = offset_sweep(embedder, n, EmbeddingIndex::build(std::move(gallery)),
                            truth, offsets, seed, jobs);
      }
      write_text(out_path, offset_sweep_csv(rows), out);
    } else if (*complexity) {
      const RunConfig cfg = effective_config(config_path, std::nullopt);
      const auto r = complexity_report(
          describe_model_graph(cfg.net, cfg.grid, cfg.intrinsics), ref_dim);
      std::string text;
      if (as_json) {
        ojson j;
        j["flops_convention"] = "2 x MACs";
        j["params"] = r.params;
        j["macs"] = r.macs;
        j["flops"] = r.flops;
        j["bias_adds"] = r.bias_adds;
        j["embedding_dim"] = r.embedding_dim;
        j["reference_dim"] = r.reference_dim;
        j["memory_reduction_pct"] = r.memory_reduction_pct;
        j["query_cost_reduction_pct"] = r.query_cost_reduction_pct;
        text = j.dump(2) + "\n";
      } else if (as_csv) {
        text = complexity_report_csv(r);
      } else {
        text = complexity_report_text(r);
      }
      write_text(out_path, text, out);
    } else if (*bench) {
      const auto dims = parse_number_list(dims_text, "--dims");
      const auto sizes = parse_number_list(sizes_text, "--sizes");
      std::string csv = benchmark_csv_header() + "\n";
      Rng rng(seed);
      for (double d : dims) {
        for (double s : sizes) {
          if (d < 1 || s < 1) throw InvalidArgument("dims and sizes must be >= 1");
          const auto index = EmbeddingIndex::build(random_unit_set(
              static_cast<std::size_t>(s), static_cast<std::size_t>(d), rng));
          const auto qs = random_unit_set(n_queries, static_cast<std::size_t>(d), rng);
          const auto row = benchmark_queries(index, qs, k);
          if (!row.identical) {
            throw InvalidArgument("KD-tree and brute force disagreed");
          }
          csv += benchmark_csv_row(row) + "\n";
        }
      }
      write_text(out_path, csv, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.family() == ErrorFamily::kIo ? kIo : kValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}

}  // namespace bevcv::cli
