// tridiff: action-triplet-conditioned video diffusion at desk scale.
// Subcommands cover the full pipeline: data synthesis, preprocessing,
// codec/text-encoder pretraining, diffusion training, sampling, evaluation,
// and the ablation harness. All randomness flows from --seed; progress goes
// to stderr, data only to files. Exit codes: 0 ok, 1 usage, 2 runtime.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "tridiff/codec/codec.hpp"
#include "tridiff/data/clip_store.hpp"
#include "tridiff/data/png_io.hpp"
#include "tridiff/data/preprocess.hpp"
#include "tridiff/data/synth.hpp"
#include "tridiff/diffusion/sampler.hpp"
#include "tridiff/train/ablation.hpp"
#include "tridiff/train/evaluate.hpp"
#include "tridiff/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace tridiff;

namespace {

struct SynthArgs {
    std::string out;
    int videos = 8;
    std::uint64_t seed = 0;
    int segments = 4;
    int segment_len = 14;
    int size = 32;
    bool no_cuts = false;
    bool include_black = false;
    bool include_static = false;
};

int cmd_synth(const SynthArgs& a) {
    SynthSpec spec;
    spec.num_segments = a.segments;
    spec.segment_len = a.segment_len;
    spec.height = a.size;
    spec.width = a.size;
    spec.include_cuts = !a.no_cuts;
    spec.include_black = a.include_black;
    spec.include_static = a.include_static;
    spec.validate();

    Rng base(a.seed);
    std::vector<SynthOutput> videos;
    for (int v = 0; v < a.videos; ++v) {
        videos.push_back(synth_video(spec, base.derive(static_cast<std::uint64_t>(v)).seed()));
        std::cerr << "synth: video " << v + 1 << "/" << a.videos << "\n";
    }
    save_raw_store(a.out, videos, spec, a.seed);
    std::cerr << "synth: wrote " << a.videos << " videos to " << a.out << "\n";
    return 0;
}

struct PreprocessArgs {
    std::string in, out;
    double cut_threshold = kDefaultCutThreshold;
    int frames = kClipFrames;
};

int cmd_preprocess(const PreprocessArgs& a) {
    RawStore raw = load_raw_store(a.in);
    std::vector<Clip> clips;
    for (size_t v = 0; v < raw.videos.size(); ++v) {
        auto cuts = detect_scene_cuts(raw.videos[v], a.cut_threshold);
        auto extracted = extract_clips(raw.videos[v], cuts, a.frames);
        auto kept = filter_static(std::move(extracted));
        std::cerr << "preprocess: video " << v << " -> " << kept.size() << " clips\n";
        for (auto& c : kept) clips.push_back(std::move(c));
    }
    nlohmann::json source{{"raw_store", a.in},
                          {"cut_threshold", a.cut_threshold},
                          {"raw_seed", raw.manifest.value("seed", 0ULL)}};
    save_clip_store(a.out, clips, source, raw.manifest.value("seed", 0ULL));
    std::cerr << "preprocess: wrote " << clips.size() << " clips to " << a.out << "\n";
    if (clips.empty()) {
        std::cerr << "preprocess: no clips survived filtering\n";
        return 2;
    }
    return 0;
}

struct PretrainCodecArgs {
    std::string in, out;
    int iterations = 2000;
    double lr = 1e-3;
    int batch = 8;
    std::uint64_t seed = 0;
    int f = 4;
    int latent_channels = 4;
    int hidden = 32;
    bool identity = false;
};

int cmd_pretrain_codec(const PretrainCodecArgs& a) {
    CodecConfig cfg;
    cfg.f = a.f;
    cfg.latent_channels = a.latent_channels;
    cfg.hidden = a.hidden;
    cfg.identity_mode = a.identity;
    VideoCodec codec(cfg, Rng(a.seed));

    if (!cfg.identity_mode) {
        ClipStore store = load_clip_store(a.in);
        std::vector<Tensor> clips;
        for (const auto& c : store.clips) clips.push_back(c.frames);
        auto curve = pretrain_codec(codec, clips, a.iterations, a.lr, a.batch, a.seed);
        if (!curve.empty())
            std::cerr << "pretrain-codec: loss " << curve.front() << " -> " << curve.back()
                      << " over " << curve.size() << " iters\n";
    } else {
        std::cerr << "pretrain-codec: identity mode, no training needed\n";
    }
    codec.save(a.out, a.seed);
    std::cerr << "pretrain-codec: wrote " << a.out << "\n";
    return 0;
}

struct PretrainTextArgs {
    std::string in, out, lexicon;
    int iterations = 500;
    double lr = 1e-2;
    int batch = 8;
    int dim = 32;
    std::uint64_t seed = 0;
};

int cmd_pretrain_text(const PretrainTextArgs& a) {
    Lexicon lex = a.lexicon.empty() ? Lexicon::defaults() : Lexicon::load(a.lexicon);
    ClipStore store = load_clip_store(a.in);
    std::vector<std::pair<ActionTriplet, Tensor>> pairs;
    for (const auto& c : store.clips) pairs.emplace_back(c.common_triplet, c.frames);

    TextEncoder enc(a.dim, lex, Rng(a.seed));
    auto curve = pretrain_text_encoder(enc, pairs, a.iterations, a.lr, a.batch, a.seed);
    if (!curve.empty())
        std::cerr << "pretrain-text: loss " << curve.front() << " -> " << curve.back() << "\n";
    save_text_encoder(a.out, enc, a.seed);
    std::cerr << "pretrain-text: wrote " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string in, out, codec_path, trace, config_path, text_ckpt, lexicon;
    TrainConfig cfg;
};

VideoCodec load_codec_or_identity(const std::string& path) {
    if (!path.empty()) return VideoCodec::load(path);
    std::cerr << "note: no --codec given, using the identity codec (f=1)\n";
    CodecConfig cfg;
    cfg.f = 1;
    cfg.latent_channels = 3;
    cfg.identity_mode = true;
    return VideoCodec(cfg, Rng(0));
}

TextEncoder prepare_text_encoder(const TrainConfig& cfg, const std::string& text_ckpt,
                                 const Lexicon& lex, const ClipStore& store) {
    if (!text_ckpt.empty()) return load_text_encoder(text_ckpt);
    std::cerr << "note: no --text-ckpt given, pretraining a text encoder on the training set\n";
    TextEncoder enc(cfg.token_dim, lex, Rng(cfg.seed ^ 0x7E57ULL));
    std::vector<std::pair<ActionTriplet, Tensor>> pairs;
    for (const auto& c : store.clips) pairs.emplace_back(c.common_triplet, c.frames);
    pretrain_text_encoder(enc, pairs, 300, 1e-2, 8, cfg.seed ^ 0x7E57ULL);
    return enc;
}

int cmd_train(TrainArgs& a) {
    if (!a.config_path.empty()) {
        std::ifstream is(a.config_path);
        if (!is) throw std::runtime_error("cannot open config: " + a.config_path);
        nlohmann::json j;
        is >> j;
        a.cfg = TrainConfig::from_json(j);
    }
    a.cfg.validate();
    Lexicon lex = a.lexicon.empty() ? Lexicon::defaults() : Lexicon::load(a.lexicon);
    ClipStore store = load_clip_store(a.in);
    VideoCodec codec = load_codec_or_identity(a.codec_path);

    const bool uses_text = a.cfg.conditioning == ConditioningKind::text ||
                           a.cfg.conditioning == ConditioningKind::text_finetuned;
    TextEncoder text;
    TextEncoder* text_ptr = nullptr;
    if (uses_text) {
        text = prepare_text_encoder(a.cfg, a.text_ckpt, lex, store);
        text_ptr = &text;
    }

    TrainHooks hooks;
    hooks.checkpoint_path = a.out;
    hooks.trace_csv_path = a.trace;
    hooks.progress = &std::cerr;
    train(a.cfg, store, codec, lex, text_ptr, nullptr, hooks);

    // effective config next to the checkpoint
    std::ofstream cfg_out(a.out + ".config.json");
    cfg_out << a.cfg.to_json().dump(2) << "\n";
    std::cerr << "train: wrote " << a.out << "\n";
    return 0;
}

struct SampleArgs {
    std::string ckpt, codec_path, frame_path, out, triplet_str;
    int steps = 50;
    int frames = kClipFrames;
    std::uint64_t seed = 0;
};

ActionTriplet parse_triplet(const std::string& s) {
    ActionTriplet t;
    char c1, c2;
    std::istringstream is(s);
    if (!(is >> t.instrument_id >> c1 >> t.verb_id >> c2 >> t.target_id) || c1 != ',' || c2 != ',')
        throw CLI::ValidationError("--triplet", "expected i,v,t (e.g. 1,2,3)");
    t.validate();
    return t;
}

int cmd_sample(const SampleArgs& a) {
    TrainedModel model = TrainedModel::load(a.ckpt);
    VideoCodec codec = load_codec_or_identity(a.codec_path);
    const ActionTriplet triplet = parse_triplet(a.triplet_str);
    Tensor frame = frame_from_u8(read_png_rgb8(a.frame_path));

    GenerationBundle bundle;
    bundle.codec = &codec;
    bundle.denoiser = &model.denoiser;
    bundle.cond = &model.cond;
    bundle.frames = a.frames;

    Tensor video = sample_video(frame, triplet, bundle, model.sched, a.steps, a.seed);
    fs::create_directories(a.out);
    for (int f = 0; f < video.dim(0); ++f)
        write_png_rgb8((fs::path(a.out) / ("frame_" + detail::zero_pad(f, 2) + ".png")).string(),
                       frame_to_u8(video_frame(video, f)));
    nlohmann::json meta{{"triplet", {triplet.instrument_id, triplet.verb_id, triplet.target_id}},
                        {"steps", a.steps},
                        {"seed", a.seed},
                        {"frames", a.frames},
                        {"checkpoint", a.ckpt}};
    detail::write_json(fs::path(a.out) / "sample.json", meta);
    std::cerr << "sample: wrote " << video.dim(0) << " frames to " << a.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string ckpt, codec_path, in, out;
    int steps = 50;
    std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
    TrainedModel model = TrainedModel::load(a.ckpt);
    VideoCodec codec = load_codec_or_identity(a.codec_path);
    ClipStore store = load_clip_store(a.in);
    auto ev = evaluate(model, codec, store, a.steps, a.seed);
    const std::string name = std::string(conditioning_kind_name(model.cfg.conditioning)) + "/" +
                             (model.cfg.conditioning == ConditioningKind::none
                                  ? "-"
                                  : fusion_kind_name(model.cfg.fusion));
    write_metrics_report(a.out, name, ev.report);
    std::cerr << "eval: " << metrics_csv_header() << "\n";
    std::cerr << "eval: " << metrics_csv_row(name, ev.report) << "\n";
    return 0;
}

struct AblateArgs {
    std::string grid = "table2";
    std::string data, test_data, codec_path, out, text_ckpt, lexicon;
    TrainConfig cfg;
    int steps = 50;
};

int cmd_ablate(AblateArgs& a) {
    AblationGrid grid = AblationGrid::by_name(a.grid);
    Lexicon lex = a.lexicon.empty() ? Lexicon::defaults() : Lexicon::load(a.lexicon);
    VideoCodec codec = load_codec_or_identity(a.codec_path);

    ClipStore train_store, test_store;
    if (!a.test_data.empty()) {
        train_store = load_clip_store(a.data);
        test_store = load_clip_store(a.test_data);
    } else {
        // deterministic 80/20 split by manifest order
        ClipStore all = load_clip_store(a.data);
        for (size_t i = 0; i < all.clips.size(); ++i) {
            auto& dst = (i % 5 == 4) ? test_store : train_store;
            dst.clips.push_back(std::move(all.clips[i]));
            dst.ids.push_back(all.ids[i]);
        }
        std::cerr << "ablate: split " << a.data << " into " << train_store.clips.size()
                  << " train / " << test_store.clips.size() << " test clips\n";
    }
    if (train_store.clips.empty() || test_store.clips.empty())
        throw std::runtime_error("ablate: need non-empty train and test clip sets");

    const bool grid_uses_text = true;  // the full grid always has text rows
    TextEncoder text;
    TextEncoder* text_ptr = nullptr;
    if (grid_uses_text) {
        text = a.text_ckpt.empty() ? prepare_text_encoder(a.cfg, "", lex, train_store)
                                   : load_text_encoder(a.text_ckpt);
        text_ptr = &text;
    }

    auto results = run_ablation(grid, a.cfg, train_store, test_store, codec, lex, text_ptr,
                                a.steps, &std::cerr);
    fs::create_directories(fs::path(a.out).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(a.out).parent_path());
    write_ablation_report(a.out, results);
    std::cerr << "ablate: wrote " << a.out << "\n";
    for (const auto& r : results)
        if (!r.ok) return 2;
    return 0;
}

void add_model_size_flags(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--timesteps", cfg.timesteps, "diffusion steps T");
    cmd->add_option("--beta-start", cfg.beta_start, "schedule start");
    cmd->add_option("--beta-end", cfg.beta_end, "schedule end");
    cmd->add_option("--base-channels", cfg.base_channels, "denoiser width");
    cmd->add_option("--depth", cfg.depth, "denoiser blocks");
    cmd->add_option("--cond-dim", cfg.cond_dim, "conditioning width");
    cmd->add_option("--token-dim", cfg.token_dim, "encoder token width");
    cmd->add_option("--time-embed-dim", cfg.time_embed_dim, "timestep embedding width");
    cmd->add_option("--frame-hidden", cfg.frame_hidden, "frame encoder width");
    cmd->add_flag("--no-temporal", [&cfg](std::int64_t) { cfg.temporal_enabled = false; },
                  "disable temporal attention layers");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"action-triplet conditioned video diffusion pipeline"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic raw video store");
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
    synth_cmd->add_option("--videos", synth_args.videos, "number of videos");
    synth_cmd->add_option("--seed", synth_args.seed, "random seed");
    synth_cmd->add_option("--segments", synth_args.segments, "segments per video");
    synth_cmd->add_option("--segment-len", synth_args.segment_len, "frames per segment");
    synth_cmd->add_option("--size", synth_args.size, "frame height and width");
    synth_cmd->add_flag("--no-cuts", synth_args.no_cuts, "continuous video without hard cuts");
    synth_cmd->add_flag("--include-black", synth_args.include_black, "insert blacked-out frames");
    synth_cmd->add_flag("--include-static", synth_args.include_static, "insert an idle segment");

    PreprocessArgs pre_args;
    auto* pre_cmd = app.add_subcommand("preprocess", "cut detection, windowing and filtering");
    pre_cmd->add_option("--in", pre_args.in, "raw store directory")->required();
    pre_cmd->add_option("--out", pre_args.out, "clip store directory")->required();
    pre_cmd->add_option("--cut-threshold", pre_args.cut_threshold, "scene cut score threshold");
    pre_cmd->add_option("--frames", pre_args.frames, "frames per clip");

    PretrainCodecArgs pc_args;
    auto* pc_cmd = app.add_subcommand("pretrain-codec", "train the pixel<->latent autoencoder");
    pc_cmd->add_option("--in", pc_args.in, "clip store directory");
    pc_cmd->add_option("--out", pc_args.out, "codec checkpoint path")->required();
    pc_cmd->add_option("--iterations", pc_args.iterations, "training iterations");
    pc_cmd->add_option("--lr", pc_args.lr, "learning rate");
    pc_cmd->add_option("--batch", pc_args.batch, "batch size");
    pc_cmd->add_option("--seed", pc_args.seed, "random seed");
    pc_cmd->add_option("--f", pc_args.f, "downsample factor (1,2,4)");
    pc_cmd->add_option("--latent-channels", pc_args.latent_channels, "latent channels");
    pc_cmd->add_option("--hidden", pc_args.hidden, "hidden width");
    pc_cmd->add_flag("--identity-mode", pc_args.identity, "exact identity codec (f=1)");

    PretrainTextArgs pt_args;
    auto* pt_cmd = app.add_subcommand("pretrain-text", "contrastive caption/clip pretraining");
    pt_cmd->add_option("--in", pt_args.in, "clip store directory")->required();
    pt_cmd->add_option("--out", pt_args.out, "text encoder checkpoint path")->required();
    pt_cmd->add_option("--iterations", pt_args.iterations, "training iterations");
    pt_cmd->add_option("--lr", pt_args.lr, "learning rate");
    pt_cmd->add_option("--batch", pt_args.batch, "batch size");
    pt_cmd->add_option("--dim", pt_args.dim, "token width");
    pt_cmd->add_option("--seed", pt_args.seed, "random seed");
    pt_cmd->add_option("--lexicon", pt_args.lexicon, "lexicon JSON (default built-in)");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train the conditional video diffusion model");
    train_cmd->add_option("--in", train_args.in, "training clip store")->required();
    train_cmd->add_option("--out", train_args.out, "model checkpoint path")->required();
    train_cmd->add_option("--codec", train_args.codec_path, "codec checkpoint (default identity)");
    train_cmd->add_option("--trace", train_args.trace, "loss trace CSV path");
    train_cmd
        ->add_option("--config", train_args.config_path,
                     "JSON config file (takes precedence over the flags below)")
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--text-ckpt", train_args.text_ckpt, "pretrained text encoder");
    train_cmd->add_option("--lexicon", train_args.lexicon, "lexicon JSON (default built-in)");
    train_cmd->add_option("--iterations", train_args.cfg.iterations, "training iterations");
    train_cmd->add_option("--lr", train_args.cfg.learning_rate, "learning rate");
    train_cmd->add_option("--batch", train_args.cfg.batch_size, "batch size");
    train_cmd->add_option("--seed", train_args.cfg.seed, "random seed");
    train_cmd
        ->add_option("--conditioning", [&train_args](const std::vector<std::string>& v) {
            train_args.cfg.conditioning = conditioning_kind_from(v.at(0));
            return true;
        }, "conditioning kind")
        ->expected(1)
        ->check(CLI::IsMember({"none", "learnable", "text", "text-ft"}));
    train_cmd
        ->add_option("--fusion", [&train_args](const std::vector<std::string>& v) {
            train_args.cfg.fusion = fusion_kind_from(v.at(0));
            return true;
        }, "fusion kind")
        ->expected(1)
        ->check(CLI::IsMember({"linear", "att-i", "att-t"}));
    train_cmd->add_option("--checkpoint-interval", train_args.cfg.checkpoint_interval,
                          "periodic checkpoint interval (0 = final only)");
    add_model_size_flags(train_cmd, train_args.cfg);

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "generate a video from a frame and triplet");
    sample_cmd->add_option("--ckpt", sample_args.ckpt, "model checkpoint")->required();
    sample_cmd->add_option("--codec", sample_args.codec_path, "codec checkpoint");
    sample_cmd->add_option("--frame", sample_args.frame_path, "conditioning frame PNG")->required();
    sample_cmd->add_option("--triplet", sample_args.triplet_str, "action triplet i,v,t")->required();
    sample_cmd->add_option("--out", sample_args.out, "output frame directory")->required();
    sample_cmd->add_option("--steps", sample_args.steps, "reverse steps");
    sample_cmd->add_option("--frames", sample_args.frames, "frames to generate");
    sample_cmd->add_option("--seed", sample_args.seed, "random seed");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "metrics over a held-out clip store");
    eval_cmd->add_option("--ckpt", eval_args.ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--codec", eval_args.codec_path, "codec checkpoint");
    eval_cmd->add_option("--in", eval_args.in, "test clip store")->required();
    eval_cmd->add_option("--out", eval_args.out, "report path prefix (.json/.csv)")->required();
    eval_cmd->add_option("--steps", eval_args.steps, "reverse steps");
    eval_cmd->add_option("--seed", eval_args.seed, "random seed");

    AblateArgs ablate_args;
    auto* ablate_cmd = app.add_subcommand("ablate", "conditioning/fusion ablation table");
    ablate_cmd->add_option("--grid", ablate_args.grid, "grid name (table2 or full)");
    ablate_cmd->add_option("--data", ablate_args.data, "clip store (auto 80/20 split)")->required();
    ablate_cmd->add_option("--test-data", ablate_args.test_data, "separate test clip store");
    ablate_cmd->add_option("--codec", ablate_args.codec_path, "codec checkpoint");
    ablate_cmd->add_option("--out", ablate_args.out, "output CSV path")->required();
    ablate_cmd->add_option("--text-ckpt", ablate_args.text_ckpt, "pretrained text encoder");
    ablate_cmd->add_option("--lexicon", ablate_args.lexicon, "lexicon JSON");
    ablate_cmd->add_option("--iterations", ablate_args.cfg.iterations, "iterations per row");
    ablate_cmd->add_option("--lr", ablate_args.cfg.learning_rate, "learning rate");
    ablate_cmd->add_option("--batch", ablate_args.cfg.batch_size, "batch size");
    ablate_cmd->add_option("--seed", ablate_args.cfg.seed, "random seed");
    ablate_cmd->add_option("--steps", ablate_args.steps, "reverse steps at evaluation");
    add_model_size_flags(ablate_cmd, ablate_args.cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // help text to stdout, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // error text to stderr
        return 1;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth_args);
        if (pre_cmd->parsed()) return cmd_preprocess(pre_args);
        if (pc_cmd->parsed()) return cmd_pretrain_codec(pc_args);
        if (pt_cmd->parsed()) return cmd_pretrain_text(pt_args);
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (sample_cmd->parsed()) return cmd_sample(sample_args);
        if (eval_cmd->parsed()) return cmd_eval(eval_args);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_args);
        std::cerr << "no command given\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
