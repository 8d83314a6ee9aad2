#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tridiff/cond/triplet.hpp"
#include "tridiff/core/nn.hpp"
#include "tridiff/core/rng.hpp"
#include "tridiff/core/tape.hpp"
#include "tridiff/core/tensor.hpp"

namespace tridiff {

/// Triplet encoder backed by three embedding tables (instrument, verb,
/// target), trained end-to-end with the video objective.
class TripletEmbeddingEncoder {
public:
    TripletEmbeddingEncoder() = default;
    TripletEmbeddingEncoder(int dim, Rng init_rng) : dim_(dim) {
        instrument_table_ = Param{"cond.embed.instrument",
                                  kaiming_normal(Shape{kNumInstruments, dim}, dim, init_rng)};
        verb_table_ = Param{"cond.embed.verb", kaiming_normal(Shape{kNumVerbs, dim}, dim, init_rng)};
        target_table_ =
            Param{"cond.embed.target", kaiming_normal(Shape{kNumTargets, dim}, dim, init_rng)};
    }

    int dim() const { return dim_; }

    /// -> (3, d): one token per triplet element.
    Var encode(Tape& tape, const ActionTriplet& t) {
        t.validate();
        return tape.stack_rows({tape.embed_row(tape.param(instrument_table_), t.instrument_id),
                                tape.embed_row(tape.param(verb_table_), t.verb_id),
                                tape.embed_row(tape.param(target_table_), t.target_id)});
    }

    Tensor encode_plain(const ActionTriplet& t) {
        Tape tape;
        return tape.value(encode(tape, t));
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&instrument_table_);
        out.push_back(&verb_table_);
        out.push_back(&target_table_);
    }

    Param& verb_table() { return verb_table_; }

private:
    int dim_ = 0;
    Param instrument_table_, verb_table_, target_table_;
};

/// Word-embedding + single self-attention layer text encoder. The triplet is
/// rendered "<instrument> <verb> <target>" through the lexicon; each word
/// maps to a row of the shared word table, gets a positional embedding, and
/// one residual attention layer contextualizes the three tokens.
class TextEncoder {
public:
    TextEncoder() = default;
    TextEncoder(int dim, Lexicon lexicon, Rng init_rng) : dim_(dim), lexicon_(std::move(lexicon)) {
        lexicon_.validate();
        word_table_ =
            Param{"cond.text.words", kaiming_normal(Shape{Lexicon::vocab_size(), dim}, dim, init_rng)};
        pos_table_ = Param{"cond.text.pos", kaiming_normal(Shape{3, dim}, dim, init_rng)};
        wq_.init("cond.text.q", dim, dim, init_rng);
        wk_.init("cond.text.k", dim, dim, init_rng);
        wv_.init("cond.text.v", dim, dim, init_rng);
        wo_.init("cond.text.o", dim, dim, init_rng);
    }

    int dim() const { return dim_; }
    const Lexicon& lexicon() const { return lexicon_; }

    /// Word-table row for one triplet position, before any contextualization.
    Tensor pre_contextual_embedding(const ActionTriplet& t, int position) const {
        const int row = lexicon_.word_index(t, position);
        Tensor out(Shape{dim_});
        for (int j = 0; j < dim_; ++j)
            out[j] = word_table_.value[static_cast<std::int64_t>(row) * dim_ + j];
        return out;
    }

    /// -> (3, d) contextualized tokens.
    Var encode(Tape& tape, const ActionTriplet& t) {
        t.validate();
        Var words = tape.param(word_table_);
        Var tokens = tape.add(tape.stack_rows({tape.embed_row(words, lexicon_.word_index(t, 0)),
                                               tape.embed_row(words, lexicon_.word_index(t, 1)),
                                               tape.embed_row(words, lexicon_.word_index(t, 2))}),
                              tape.param(pos_table_));
        auto att = scaled_dot_attention(tape, wq_.forward(tape, tokens), wk_.forward(tape, tokens),
                                        wv_.forward(tape, tokens));
        return tape.add(tokens, wo_.forward(tape, att.out));
    }

    Tensor encode_plain(const ActionTriplet& t) {
        Tape tape;
        return tape.value(encode(tape, t));
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&word_table_);
        out.push_back(&pos_table_);
        wq_.collect(out);
        wk_.collect(out);
        wv_.collect(out);
        wo_.collect(out);
    }

private:
    int dim_ = 0;
    Lexicon lexicon_ = Lexicon::defaults();
    Param word_table_, pos_table_;
    LinearLayer wq_, wk_, wv_, wo_;
};

/// Conditioning-frame feature path: a small conv tower over the input frame,
/// flattened to an (m, d) token set. The first conv is bias-free so an
/// all-zero frame maps to distinguishable (zero) first-layer features.
class CondFrameEncoder {
public:
    CondFrameEncoder() = default;
    CondFrameEncoder(int dim, int hidden, Rng init_rng) : dim_(dim) {
        c1_.init("cond.frame.c1", 3, hidden, 3, 2, 1, init_rng, /*bias=*/false);
        c2_.init("cond.frame.c2", hidden, hidden, 3, 2, 1, init_rng);
        c3_.init("cond.frame.c3", hidden, dim, 3, 2, 1, init_rng);
    }

    int dim() const { return dim_; }

    /// Token count for an H x W input (8x spatial reduction).
    static int token_count(int h, int w) { return ((h + 7) / 8) * ((w + 7) / 8); }

    /// frame (1,3,H,W) or (3,H,W) in [0,1] -> (m, d) tokens.
    Var encode(Tape& tape, Var frame) {
        const Tensor& f = tape.value(frame);
        Var x = frame;
        if (f.rank() == 3) x = tape.reshape(frame, Shape{1, f.dim(0), f.dim(1), f.dim(2)});
        const Tensor& xf = tape.value(x);
        if (xf.rank() != 4 || xf.dim(0) != 1 || xf.dim(1) != 3)
            throw std::invalid_argument("frame encoder expects (1,3,H,W), got " +
                                        shape_str(f.shape()));
        Var h = tape.silu(c1_.forward(tape, x));
        h = tape.silu(c2_.forward(tape, h));
        h = c3_.forward(tape, h);
        const int gh = tape.value(h).dim(2);
        const int gw = tape.value(h).dim(3);
        // (1,d,h',w') -> (h',w',d) -> (m,d)
        return tape.reshape(tape.permute(tape.reshape(h, Shape{dim_, gh, gw}), {1, 2, 0}),
                            Shape{gh * gw, dim_});
    }

    Tensor encode_plain(const Tensor& frame) {
        Tape tape;
        return tape.value(encode(tape, tape.constant(frame)));
    }

    void collect(std::vector<Param*>& out) {
        c1_.collect(out);
        c2_.collect(out);
        c3_.collect(out);
    }

private:
    int dim_ = 0;
    Conv2dLayer c1_, c2_, c3_;
};

}  // namespace tridiff
