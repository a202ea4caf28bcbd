#include "prism/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "prism/analysis.hpp"
#include "prism/error.hpp"
#include "prism/parallel.hpp"
#include "prism/rng.hpp"
#include "prism/serialize.hpp"
#include "prism/text.hpp"

namespace prism {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Facet equalize(const Facet &facet, const FacetEntry &entry, std::uint64_t seed, std::string &note) {
  switch (entry.equalize) {
    case Equalize::None:
      note = "none";
      return facet;
    case Equalize::ZeroPad:
      note = "zero_pad:" + std::to_string(entry.target_dim);
      return zero_pad(facet, entry.target_dim);
    case Equalize::Pca: {
      PcaOptions opts;
      opts.seed = seed;
      auto res = pca_compress(facet, entry.target_dim, opts);
      note = "pca_centered:" + std::to_string(entry.target_dim) + (res.degenerate_rank ? ":degenerate_rank" : "");
      return std::move(res.facet);
    }
  }
  return facet;
}

}  // namespace

Workspace prepare(const RunConfig &config) {
  Workspace ws;
  ws.config = config;
  ClassificationSet ctrain, cval, ctest;
  TaggingSet ttrain, tval, ttest;
  if (config.synthetic) {
    const auto &syn = *config.synthetic;
    switch (syn.kind) {
      case SyntheticEntry::Kind::Separable: {
        auto gen = make_separable(syn.separable);
        ws.facets = std::move(gen.facets);
        ctrain = std::move(gen.train), cval = std::move(gen.val), ctest = std::move(gen.test);
        break;
      }
      case SyntheticEntry::Kind::Rotated: {
        auto gen = make_rotated(syn.rotated);
        ws.facets = std::move(gen.facets);
        ctrain = std::move(gen.train), cval = std::move(gen.val), ctest = std::move(gen.test);
        break;
      }
      case SyntheticEntry::Kind::Tagging: {
        auto gen = make_tagging(syn.tagging);
        ws.facets = std::move(gen.facets);
        ttrain = std::move(gen.train), tval = std::move(gen.val), ttest = std::move(gen.test);
        break;
      }
    }
    ws.facet_notes.assign(ws.facets.size(), "synthetic");
    ws.has_test = true;
  } else {
    for (std::size_t i = 0; i < config.facets.size(); ++i) {
      const auto &entry = config.facets[i];
      Facet raw = load_facet(entry.path, entry.format, entry.name);
      std::string note;
      ws.facets.push_back(equalize(raw, entry, sub_seed(config.seed, "pca" + std::to_string(i)), note));
      ws.facet_notes.push_back(note);
    }
    ws.has_test = !config.test_path.empty();
    if (config.task == TaskKind::Classify) {
      ctrain = read_classification(config.train_path);
      cval = read_classification(config.val_path, ctrain.labels);
      if (ws.has_test) ctest = read_classification(config.test_path, cval.labels);
    } else {
      ttrain = read_tagged(config.train_path);
      tval = read_tagged(config.val_path, ttrain.tags);
      if (ws.has_test) ttest = read_tagged(config.test_path, tval.tags);
    }
  }

  if (config.task == TaskKind::Classify) {
    ws.train = encode(ctrain, ws.facets);
    ws.val = encode(cval, ws.facets);
    if (ws.has_test) ws.test = encode(ctest, ws.facets);
    const auto &labels = ws.has_test ? ctest.labels : cval.labels;
    ws.class_names = labels.names;
  } else {
    ws.train = encode(ttrain, ws.facets);
    ws.val = encode(tval, ws.facets);
    if (ws.has_test) ws.test = encode(ttest, ws.facets);
    const auto &tags = ws.has_test ? ttest.tags : tval.tags;
    ws.class_names = tags.names;
  }
  // Later splits may introduce labels; every split shares the final inventory.
  const int classes = static_cast<int>(ws.class_names.size());
  ws.train.classes = ws.val.classes = ws.test.classes = classes;

  std::vector<int> dims;
  for (const auto &f : ws.facets) dims.push_back(f.dim());
  ws.baseline = make_baseline(config.mode, dims, config.meta_dim, sub_seed(config.seed, "init"));
  apply_override(ws.baseline, config.projection);
  ws.baseline.config.beta = config.beta;
  validate(ws.baseline.params, ws.baseline.config);
  return ws;
}

namespace {

void write_text_file(const fs::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

// Writes the counted-header text table plus the float32 sidecar and its token list.
std::vector<fs::path> write_table_files(const fs::path &text_path, const MetaTable &table) {
  std::vector<fs::path> written;
  {
    std::ostringstream s;
    write_table_text(s, table);
    write_text_file(text_path, s.str());
    written.push_back(text_path);
  }
  fs::path bin = text_path;
  bin.replace_extension(".bin");
  {
    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + bin.string());
    write_table_binary(out, table);
    written.push_back(bin);
  }
  fs::path toks = text_path;
  toks.replace_extension(".tokens");
  {
    std::ostringstream s;
    for (const auto &t : table.vocab.tokens) s << t << '\n';
    write_text_file(toks, s.str());
    written.push_back(toks);
  }
  return written;
}

json model_shape(const Workspace &ws) {
  const auto &c = ws.baseline.config;
  return {{"mode", std::string(to_string(ws.config.mode))},
          {"projection_override", std::string(to_string(ws.config.projection))},
          {"projection", std::string(to_string(c.projection))},
          {"combiner", std::string(to_string(c.combiner))},
          {"meta_dim", c.meta_dim},
          {"facet_dims", c.facet_dims},
          {"beta_retraction", c.beta}};
}

std::string metric_name(TaskKind task) { return task == TaskKind::Classify ? "accuracy" : "micro_f1_without_o"; }

Model load_checked_model(const fs::path &params_path, const Workspace &ws) {
  Model model = load_model(params_path);
  validate(model.meta, ws.baseline.config);
  const int input = head_input_dim(ws.baseline.config, ws.config.task, ws.config.train.window);
  if (model.head.weight.cols() != input || model.head.weight.rows() != static_cast<int>(ws.class_names.size())) {
    throw Error(Errc::InvalidDimensions, "parameter file head does not match the config's task");
  }
  return model;
}

}  // namespace

int cmd_train(const fs::path &config_path, std::optional<fs::path> out_dir, std::ostream &out, std::ostream &err) {
  std::string stage = "config";
  std::vector<fs::path> written;
  try {
    const auto config = load_run_config(config_path);
    stage = "prepare";
    const auto ws = prepare(config);
    const fs::path dir = out_dir.value_or(config.output_dir);

    stage = "train";
    TrainConfig tc = config.train;
    tc.threads = worker_count();
    const auto run = train(ws.train, ws.val, ws.baseline, tc);

    stage = "export";
    const auto vocab = union_vocab(ws.facets);
    const auto table = export_table(run.best.meta, ws.baseline.config, ws.facets, vocab, tc.threads);

    stage = "write";
    fs::create_directories(dir);
    {
      std::ostringstream s;
      write_history_csv(s, run);
      write_text_file(dir / "history.csv", s.str());
      written.push_back(dir / "history.csv");
    }
    save_model(dir / "params.bin", run.best);
    written.push_back(dir / "params.bin");
    for (auto &p : write_table_files(dir / "meta.vec", table)) written.push_back(p);

    json facets = json::array();
    for (std::size_t f = 0; f < ws.facets.size(); ++f) {
      facets.push_back({{"name", ws.facets[f].name()},
                        {"dim", ws.facets[f].dim()},
                        {"vocab", ws.facets[f].size()},
                        {"equalize", ws.facet_notes[f]},
                        {"checksum_fnv1a64", hex64(checksum(ws.facets[f]))}});
    }
    json seeds = {{"config", config.seed}, {"init", sub_seed(config.seed, "init")}};
    for (const auto &[name, value] : run.seeds) seeds[name] = value;
    const auto &adam = tc.adam;
    json manifest = {
        {"config", config.raw},
        {"model", model_shape(ws)},
        {"facets", facets},
        {"seeds", seeds},
        {"optimizer", {{"name", "adam"}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
        {"schedule",
         {{"initial_lr", tc.learning_rate}, {"factor", tc.plateau_factor}, {"patience", tc.plateau_patience},
          {"improvement", "strict"}}},
        {"batch_loss", "mean"},
        {"metric", metric_name(config.task)},
        {"epochs_run", run.history.size()},
        {"best_epoch", run.best_epoch},
        {"best_val_metric", run.best_epoch > 0 ? run.history[run.best_epoch - 1].val_metric : 0.0},
        {"max_step_ortho_error", run.max_step_ortho_error},
        {"vocab_size", vocab.size()},
    };
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    written.push_back(dir / "manifest.json");

    out << "trained " << run.history.size() << " epochs; best epoch " << run.best_epoch << "; outputs in "
        << dir.string() << '\n';
    return 0;
  } catch (const std::exception &e) {
    std::error_code ec;
    for (const auto &p : written) fs::remove(p, ec);
    err << "train failed at stage '" << stage << "': " << e.what() << '\n';
    return 1;
  }
}

int cmd_export(const fs::path &params_path, const fs::path &config_path, const fs::path &out_path, std::ostream &out,
               std::ostream &err) {
  try {
    const auto ws = prepare(load_run_config(config_path));
    const Model model = load_checked_model(params_path, ws);
    const auto vocab = union_vocab(ws.facets);
    const auto table = export_table(model.meta, ws.baseline.config, ws.facets, vocab, worker_count());
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_table_files(out_path, table);

    // Re-read what was written and compare against on-the-fly composition.
    const Facet reread = load_facet(out_path, FacetFormat::CountedHeader, "export");
    Rng rng(sub_seed(ws.config.seed, "export-check"));
    const std::size_t checks = std::min<std::size_t>(100, vocab.size());
    for (std::size_t i = 0; i < checks; ++i) {
      const auto &tok = vocab.tokens[rng.index(vocab.size())];
      const Vector live = meta_embed(model.meta, ws.baseline.config, facet_lookups(ws.facets, tok));
      const auto row = reread.lookup(tok);
      if (row.oov || row.vector != live) {
        err << "export verification failed for token '" << tok << "'\n";
        return 1;
      }
    }
    out << "exported " << vocab.size() << " x " << ws.baseline.config.meta_dim << " to " << out_path.string()
        << " (verified " << checks << " tokens)\n";
    return 0;
  } catch (const std::exception &e) {
    err << "export failed: " << e.what() << '\n';
    return 1;
  }
}

int cmd_eval(const fs::path &params_path, const fs::path &config_path, const std::string &split,
             std::optional<fs::path> out_dir, std::ostream &out, std::ostream &err) {
  try {
    const auto ws = prepare(load_run_config(config_path));
    const Model model = load_checked_model(params_path, ws);
    const Dataset *data = nullptr;
    if (split == "train") data = &ws.train;
    else if (split == "val") data = &ws.val;
    else if (split == "test" && ws.has_test) data = &ws.test;
    if (data == nullptr) throw Error(Errc::InvalidConfig, "unknown or unavailable split '" + split + "'");
    const auto ev = evaluate(model, ws.baseline.config, *data, ws.config.train.window);
    const auto name = metric_name(ws.config.task);
    out << name << '\t' << text::fmt(ev.metric) << '\n';
    const fs::path dir = out_dir.value_or(ws.config.output_dir);
    fs::create_directories(dir);
    json doc = {{"split", split}, {"metric", name}, {"value", ev.metric}, {"count", ev.golds.size()}};
    write_text_file(dir / "eval.json", doc.dump(2) + "\n");
    return 0;
  } catch (const std::exception &e) {
    err << "eval failed: " << e.what() << '\n';
    return 1;
  }
}

int cmd_analyze(const fs::path &params_path, const fs::path &config_path, std::vector<std::uint64_t> seeds,
                std::size_t sample, std::optional<fs::path> out_dir, std::ostream &out, std::ostream &err) {
  try {
    const auto ws = prepare(load_run_config(config_path));
    const Model model = load_checked_model(params_path, ws);
    if (seeds.empty()) {
      for (int i = 0; i < 5; ++i) seeds.push_back(sub_seed(ws.config.seed, "kmeans" + std::to_string(i)));
    }
    const auto tokens = shared_sample_tokens(ws.facets, sample);
    if (tokens.empty()) throw Error(Errc::DegenerateInput, "facets share no tokens");
    const auto stack = stack_transformed(model.meta, ws.baseline.config, ws.facets, tokens);
    const auto report = separability_report(stack, seeds);
    const auto first = kmeans(stack.points, report.k, seeds.front());

    const fs::path dir = out_dir.value_or(ws.config.output_dir);
    fs::create_directories(dir);
    {
      std::ostringstream s;
      write_separability_csv(s, report);
      write_text_file(dir / "separability.csv", s.str());
    }
    {
      std::ostringstream s;
      write_points_csv(s, stack, first.labels);
      write_text_file(dir / "points.csv", s.str());
    }
    out << "ami_mean\t" << text::fmt(report.mean) << "\nami_stddev\t" << text::fmt(report.stddev) << '\n';
    return 0;
  } catch (const std::exception &e) {
    err << "analyze failed: " << e.what() << '\n';
    return 1;
  }
}

int cmd_inspect(const fs::path &facet_path, std::ostream &out, std::ostream &err) {
  try {
    const Facet facet = load_facet(facet_path);
    const auto &t = facet.table();
    if ((facet.centroid() - centroid(t)).cwiseAbs().maxCoeff() > 1e-12) {
      throw Error(Errc::NonFiniteValue, "cached centroid disagrees with the table mean");
    }
    out << "name\t" << facet.name() << '\n'
        << "vocab_size\t" << facet.size() << '\n'
        << "dim\t" << facet.dim() << '\n'
        << "centroid_norm\t" << text::fmt(facet.centroid().norm()) << '\n'
        << "min\t" << text::fmt(t.minCoeff()) << '\n'
        << "max\t" << text::fmt(t.maxCoeff()) << '\n'
        << "checksum\t" << hex64(checksum(facet)) << '\n'
        << "status\tok\n";
    return 0;
  } catch (const std::exception &e) {
    err << "inspect failed: " << e.what() << '\n';
    return 1;
  }
}

int cmd_generate(const fs::path &config_path, const fs::path &out_dir, std::ostream &out, std::ostream &err) {
  try {
    const auto config = load_run_config(config_path);
    if (!config.synthetic) throw Error(Errc::InvalidConfig, "generate needs a config with a 'synthetic' section");
    fs::create_directories(out_dir);
    json facets = json::array();
    auto dump_facets = [&](const std::vector<Facet> &fs_) {
      for (const auto &f : fs_) {
        std::ostringstream s;
        write_facet(s, f.vocab(), f.table());
        write_text_file(out_dir / (f.name() + ".vec"), s.str());
        facets.push_back({{"name", f.name()}, {"path", f.name() + ".vec"}, {"format", "counted"}});
      }
    };
    auto dump = [&](const std::string &name, const auto &set, auto writer) {
      std::ostringstream s;
      writer(s, set);
      write_text_file(out_dir / name, s.str());
    };
    const auto &syn = *config.synthetic;
    if (syn.kind == SyntheticEntry::Kind::Tagging) {
      const auto gen = make_tagging(syn.tagging);
      dump_facets(gen.facets);
      dump("train.txt", gen.train, write_tagged);
      dump("val.txt", gen.val, write_tagged);
      dump("test.txt", gen.test, write_tagged);
    } else {
      const auto gen = syn.kind == SyntheticEntry::Kind::Separable ? make_separable(syn.separable)
                                                                    : make_rotated(syn.rotated);
      dump_facets(gen.facets);
      dump("train.txt", gen.train, write_classification);
      dump("val.txt", gen.val, write_classification);
      dump("test.txt", gen.test, write_classification);
    }
    json doc = config.raw;
    doc.erase("synthetic");
    doc["facets"] = facets;
    doc["task"]["train"] = "train.txt";
    doc["task"]["val"] = "val.txt";
    doc["task"]["test"] = "test.txt";
    doc["output_dir"] = "out";
    write_text_file(out_dir / "config.json", doc.dump(2) + "\n");
    out << "wrote " << facets.size() << " facets, splits and config.json to " << out_dir.string() << '\n';
    return 0;
  } catch (const std::exception &e) {
    err << "generate failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace prism
