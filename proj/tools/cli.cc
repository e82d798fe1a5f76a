// Copyright 2026 The segbank Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "segbank/error.h"
#include "segbank/eval.h"
#include "segbank/io.h"
#include "segbank/parallel.h"
#include "segbank/retrieval.h"

namespace segbank::cli {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  return fs::path(p.string() + suffix);
}

void add_retrieval_flags(CLI::App* cmd, retrieval::RetrievalConfig& r) {
  cmd->add_option_function<std::string>(
         "--index",
         [&r](const std::string& v) {
           r.index_kind = v == "ivf" ? retrieval::IndexKind::kIvf : retrieval::IndexKind::kFlat;
         },
         "Retrieval index")
      ->transform(CLI::IsMember({"flat", "ivf"}, CLI::ignore_case))
      ->default_str("flat");
  cmd->add_option("--nlist", r.n_list, "IVF list count (0 = ceil(sqrt(n)))")->capture_default_str();
  cmd->add_option("--nprobe", r.n_probe, "IVF lists probed per query (0 = max(1, nlist/8))")
      ->capture_default_str();
  cmd->add_option("--kmeans-iters", r.kmeans_iters, "IVF k-means iterations")->capture_default_str();
}

std::string describe_index(std::span<const std::byte> bytes) {
  ByteReader in(bytes);
  in.expect_header(RecordType::kIndex);
  std::ostringstream s;
  const auto kind = in.u8();
  const auto d = in.u32();
  const auto size = in.u32();
  const auto fp = in.u64();
  const auto n_probe = in.u32();
  const auto n_list = in.u32();
  s << "Index\n  kind: " << (kind == 0 ? "flat" : "ivf") << "\n  d: " << d
    << "\n  bank entries: " << size << "\n  bank fingerprint: " << std::hex << fp << std::dec << "\n";
  if (kind == 1) {
    in.f32_array(static_cast<std::size_t>(n_list) * d);
    s << "  n_list: " << n_list << "\n  n_probe: " << n_probe << "\n  list sizes:";
    for (std::uint32_t l = 0; l < n_list; ++l) {
      const auto len = in.u32();
      in.require(static_cast<std::size_t>(len) * 4);
      for (std::uint32_t i = 0; i < len; ++i) in.u32();
      s << " " << len;
    }
    s << "\n";
  }
  return s.str();
}

std::string label_histogram(const SegmentationMap& seg) {
  std::map<ClassId, std::size_t> hist;
  for (ClassId l : seg.labels) ++hist[l];
  std::ostringstream s;
  for (const auto& [label, n] : hist) {
    s << "    ";
    if (label == kUnassigned) {
      s << "unassigned";
    } else if (label == kIgnore) {
      s << "ignore";
    } else {
      s << label;
    }
    s << ": " << n << "\n";
  }
  return s.str();
}

}  // namespace

DatasetManifest cmd_synth(const synth::SynthConfig& cfg, const fs::path& out_dir) {
  return synth::write_dataset(synth::generate(cfg), out_dir);
}

bankbuild::BuildResult cmd_build_bank(const BuildBankArgs& args) {
  const DatasetManifest manifest = load_manifest(args.manifest);
  auto result = bankbuild::build_bank(manifest, args.build);
  if (result.bank.entries.empty()) throw ValidationError("build-bank: bank is empty");
  write_blob(result.bank, args.bank_out);
  write_text(args.log_out.empty() ? with_suffix(args.bank_out, ".log") : args.log_out,
             result.log_text());
  const auto index = retrieval::Index::build(result.bank, args.retrieval);
  index.save(args.index_out.empty() ? with_suffix(args.bank_out, ".idx") : args.index_out);
  return result;
}

void cmd_infer(const InferArgs& args) {
  const DatasetManifest manifest = load_manifest(args.manifest);
  const auto bank = read_blob<FeatureBank>(args.bank);
  if (bank.class_count != manifest.class_count()) {
    throw ShapeError("infer: bank has " + std::to_string(bank.class_count) +
                     " classes, manifest declares " + std::to_string(manifest.class_count()));
  }
  const auto& rcfg = args.pipeline.retrieval;
  if (rcfg.k == 0 || rcfg.k > bank.entries.size()) {
    throw ConfigError("infer: --topk must lie in [1, bank size = " +
                      std::to_string(bank.entries.size()) + "]");
  }
  const auto index = args.index_file.empty() ? retrieval::Index::build(bank, rcfg)
                                             : retrieval::Index::load(args.index_file, bank);

  const auto test = manifest.split("test");
  std::string missing;
  for (const ImageRecord* img : test) {
    if (img->features.empty() || img->proposals.empty()) {
      missing += (missing.empty() ? "" : ", ") + img->image_id;
    }
  }
  if (!missing.empty()) throw MissingInput("infer: test images lack features or proposals: " + missing);

  fs::create_directories(args.out_dir);
  std::vector<std::string> logs(test.size());
  parallel_for(test.size(), args.threads, [&](std::size_t i) {
    const ImageRecord& img = *test[i];
    const auto feat = read_blob<FeatureMap>(manifest.resolve(img.features));
    if (feat.d != bank.d) {
      throw ShapeError("infer: image '" + img.image_id + "' feature dim " + std::to_string(feat.d) +
                       " != bank dim " + std::to_string(bank.d));
    }
    const auto props = read_blob<ProposalSet>(manifest.resolve(img.proposals));
    std::vector<inference::ProposalLog> log;
    const auto seg = inference::segment_image(feat, props, index, args.pipeline,
                                              args.debug_log.empty() ? nullptr : &log);
    write_blob(seg, args.out_dir / (img.image_id + ".seg"));
    if (!args.debug_log.empty()) logs[i] = inference::format_log(img.image_id, log);
  });
  if (!args.debug_log.empty()) {
    std::string all;
    for (const auto& l : logs) all += l;
    write_text(args.debug_log, all);
  }
}

double cmd_eval(const EvalArgs& args) {
  const DatasetManifest manifest = load_manifest(args.manifest);
  eval::ConfusionMatrix cm(manifest.class_count());
  std::size_t images = 0;
  for (const ImageRecord* img : manifest.split("test")) {
    if (img->gt.empty()) continue;
    const fs::path pred_path = args.pred_dir / (img->image_id + ".seg");
    if (!fs::exists(pred_path)) {
      throw MissingInput("eval: no prediction for image '" + img->image_id + "' at " +
                         pred_path.string());
    }
    const auto gt = read_blob<SegmentationMap>(manifest.resolve(img->gt));
    const auto pred = read_blob<SegmentationMap>(pred_path);
    try {
      cm.accumulate(gt, pred);
    } catch (const Error& e) {
      // Re-raise with file context, keeping the error kind.
      throw Error(e.kind(), std::string(e.what()) + " (image '" + img->image_id + "', " +
                                pred_path.string() + ")");
    }
    ++images;
  }
  const auto result = eval::miou(cm);
  write_text(args.report_out, eval::report_json(cm, result, manifest.class_names, images));
  return result.mean;
}

std::string cmd_inspect(const fs::path& path) {
  const auto bytes = read_file(path);
  ByteReader head(bytes);
  const RecordType type = head.header();
  std::ostringstream s;
  switch (type) {
    case RecordType::kFeatureBank: {
      const auto bank = decode<FeatureBank>(bytes);
      std::map<ClassId, std::size_t> per_class;
      for (const auto& e : bank.entries) ++per_class[e.class_id];
      s << "FeatureBank\n  d: " << bank.d << "\n  classes: " << bank.class_count
        << "\n  entries: " << bank.entries.size() << "\n  config fingerprint: " << std::hex
        << bank.config_fingerprint << "\n  content fingerprint: " << retrieval::bank_fingerprint(bank)
        << std::dec << "\n  entries per class:\n";
      for (const auto& [c, n] : per_class) s << "    " << c << ": " << n << "\n";
      break;
    }
    case RecordType::kIndex:
      s << describe_index(bytes);
      break;
    case RecordType::kSegmentationMap: {
      const auto seg = decode<SegmentationMap>(bytes);
      s << "SegmentationMap\n  size: " << seg.height << "x" << seg.width << "\n  labels:\n"
        << label_histogram(seg);
      break;
    }
    case RecordType::kFeatureMap: {
      const auto f = decode<FeatureMap>(bytes);
      s << "FeatureMap\n  image: " << f.image_id << "\n  grid: " << f.h << "x" << f.w
        << "\n  d: " << f.d << "\n  patch: " << f.patch << "\n";
      break;
    }
    case RecordType::kDenseLogits: {
      const auto l = decode<DenseLogits>(bytes);
      s << "DenseLogits\n  image: " << l.image_id << "\n  classes: " << l.classes
        << "\n  size: " << l.height << "x" << l.width << "\n";
      break;
    }
    case RecordType::kProposalSet: {
      const auto p = decode<ProposalSet>(bytes);
      s << "ProposalSet\n  image: " << p.image_id << "\n  size: " << p.height << "x" << p.width
        << "\n  proposals: " << p.proposals.size() << "\n";
      for (std::size_t i = 0; i < p.proposals.size(); ++i) {
        s << "    " << i << ": objectness=" << p.proposals[i].objectness
          << " pixels=" << p.proposals[i].mask.popcount() << "\n";
      }
      break;
    }
    case RecordType::kBitMask: {
      const auto m = decode<BitMask>(bytes);
      s << "BitMask\n  size: " << m.height() << "x" << m.width() << "\n  foreground: "
        << m.popcount() << "\n";
      break;
    }
    case RecordType::kSoftMask: {
      const auto m = decode<SoftMask>(bytes);
      double mass = 0;
      for (float v : m.weights) mass += v;
      s << "SoftMask\n  grid: " << m.h << "x" << m.w << "\n  total weight: " << mass << "\n";
      break;
    }
    default:
      throw FormatError("inspect: unknown record type tag " +
                        std::to_string(static_cast<unsigned>(type)));
  }
  return s.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-free retrieval-based semantic segmentation engine", "segbank"};
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  unsigned threads = 1;

  // synth
  synth::SynthConfig scfg;
  fs::path synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--out", synth_out, "Output dataset directory")->required();
  synth_cmd->add_option("--classes", scfg.classes, "Classes including background")->capture_default_str();
  synth_cmd->add_option("--train", scfg.train_images, "Train images")->capture_default_str();
  synth_cmd->add_option("--test", scfg.test_images, "Test images")->capture_default_str();
  synth_cmd->add_option("--image-px", scfg.image_px, "Image edge in pixels")->capture_default_str();
  synth_cmd->add_option("--grid", scfg.grid, "Feature grid edge")->capture_default_str();
  synth_cmd->add_option("--dim", scfg.d, "Feature dimension")->capture_default_str();
  synth_cmd->add_option("--min-angle", scfg.centroid_min_angle_deg, "Min centroid angle (deg)")
      ->capture_default_str();
  synth_cmd->add_option("--noise", scfg.noise_sigma, "Feature noise sigma")->capture_default_str();
  synth_cmd->add_option("--shapes-min", scfg.shapes_min)->capture_default_str();
  synth_cmd->add_option("--shapes-max", scfg.shapes_max)->capture_default_str();
  synth_cmd->add_option("--distractors", scfg.distractors, "Distractor proposals per test image")
      ->capture_default_str();
  synth_cmd->add_option("--tau-obj", scfg.tau_obj, "Objectness threshold distractors are scored against")
      ->capture_default_str();
  synth_cmd->add_option("--boundary-noise", scfg.boundary_noise_px,
                        "Max pixels pseudo-mask boundaries are grown/shrunk")
      ->capture_default_str();
  synth_cmd->add_option("--hallucination", scfg.hallucination_prob,
                        "Chance of a spurious absent-class logit region per train image")
      ->capture_default_str();
  synth_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();

  // build-bank
  BuildBankArgs bb;
  auto* build_cmd = app.add_subcommand("build-bank", "Build the purified feature bank");
  build_cmd->add_option("--manifest", bb.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--out", bb.bank_out, "Bank output file")->required();
  build_cmd->add_option("--log", bb.log_out, "Build log (default <out>.log)");
  build_cmd->add_option("--index-out", bb.index_out, "Index output (default <out>.idx)");
  build_cmd->add_option("--kernel", bb.build.morph.kernel, "Erosion kernel edge (odd)")->capture_default_str();
  build_cmd->add_option("--iters", bb.build.morph.iterations, "Erosion iterations")->capture_default_str();
  build_cmd->add_flag("!--no-backoff", bb.build.morph.backoff, "Disable erosion backoff on vanished masks");
  build_cmd->add_flag("!--no-erode-background", bb.build.extract.erode_background,
                      "Skip erosion of the background region");
  build_cmd->add_flag("--split-components", bb.build.extract.split_components,
                      "One prototype per connected component");
  build_cmd->add_option("--alpha", bb.build.purify.alpha_pct, "Outlier percentage dropped per class")
      ->capture_default_str();
  build_cmd->add_option("--eps", bb.build.agg.epsilon, "Pooling epsilon")->capture_default_str();
  add_retrieval_flags(build_cmd, bb.retrieval);
  build_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  build_cmd->add_option("--threads", threads, "Worker threads")->capture_default_str();

  // infer
  InferArgs inf;
  auto* infer_cmd = app.add_subcommand("infer", "Segment test images");
  infer_cmd->add_option("--manifest", inf.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--bank", inf.bank, "Bank file")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--out", inf.out_dir, "Output directory for maps")->required();
  infer_cmd->add_option("--index-file", inf.index_file, "Prebuilt index (else built from flags)")
      ->check(CLI::ExistingFile);
  infer_cmd->add_option("--debug-log", inf.debug_log, "Per-proposal log file");
  infer_cmd->add_option("--topk", inf.pipeline.retrieval.k, "Neighbors retrieved per proposal")
      ->capture_default_str();
  add_retrieval_flags(infer_cmd, inf.pipeline.retrieval);
  infer_cmd->add_option("--tau-obj", inf.pipeline.infer.tau_obj, "Objectness threshold")->capture_default_str();
  infer_cmd->add_option("--tau-nms", inf.pipeline.infer.tau_nms, "NMS IoU threshold")->capture_default_str();
  infer_cmd->add_flag("!--no-background-fill", inf.pipeline.infer.background_fill,
                      "Leave unclaimed pixels unassigned");
  infer_cmd->add_option("--eps", inf.pipeline.agg.epsilon, "Pooling epsilon")->capture_default_str();
  infer_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  infer_cmd->add_option("--threads", threads, "Worker threads")->capture_default_str();

  // eval
  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predicted maps against ground truth");
  eval_cmd->add_option("--pred", ev.pred_dir, "Directory of predicted maps")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--manifest", ev.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev.report_out, "JSON report path")->required();

  // inspect
  fs::path inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a bank, index, map or other record");
  inspect_cmd->add_option("file", inspect_path, "Record file")->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv;
  argv.push_back("segbank");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: UsageError: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*synth_cmd) {
      scfg.seed = seed;
      const auto m = cmd_synth(scfg, synth_out);
      out << "wrote " << m.images.size() << " images to " << synth_out.string() << "\n";
    } else if (*build_cmd) {
      bb.retrieval.seed = seed;
      bb.build.threads = threads;
      const auto r = cmd_build_bank(bb);
      for (const auto& w : r.warnings) err << "warning: " << w << "\n";
      out << "bank: " << r.bank.entries.size() << " entries, d=" << r.bank.d << "\n";
    } else if (*infer_cmd) {
      inf.pipeline.retrieval.seed = seed;
      inf.threads = threads;
      cmd_infer(inf);
      out << "wrote maps to " << inf.out_dir.string() << "\n";
    } else if (*eval_cmd) {
      const double m = cmd_eval(ev);
      out << "mIoU: " << m << "\n";
    } else if (*inspect_cmd) {
      out << cmd_inspect(inspect_path);
    }
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: InternalError: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}

}  // namespace segbank::cli
