#include "fdx/model/transformer.hpp"

#include "fdx/core/error.hpp"
#include "fdx/core/random.hpp"
#include "kernels.hpp"

#include <algorithm>

namespace fdx::model {

using kernels::add_row;
using kernels::affine_row;
using kernels::attend_row;
using kernels::axpy;
using kernels::gelu_row;
using kernels::layernorm_row;

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void check_features(const SceneVector& s, int d_v) {
    if (static_cast<int>(s.features.size()) != d_v)
        throw Error(ErrorCode::DimMismatch, "scene " + std::to_string(s.scene_id) + " has " +
                                                std::to_string(s.features.size()) + " features, expected " +
                                                std::to_string(d_v));
}

template <typename T>
void encode_visual_row(const SceneVector& s, const Parameters<T>& p, T* out) {
    const auto& c = p.config;
    check_features(s, c.d_v);
    T feat[64];
    std::vector<T> big;
    T* f = feat;
    if (c.d_v > 64) {
        big.resize(sz(c.d_v));
        f = big.data();
    }
    for (int i = 0; i < c.d_v; ++i) f[i] = static_cast<T>(s.features[sz(i)]);
    affine_row(f, p.at(p.lay().vis_w), p.at(p.lay().vis_b), c.d_v, c.d_model, out);
}

template <typename T>
void check_frame(const TimelineFrame& f, const Vocabulary& v) {
    if (f.listen < 0 || f.listen >= v.audio_size || f.speak < 0 || f.speak >= v.audio_size || f.text < 0 ||
        f.text >= v.text_size || f.action < 0 || f.action >= v.action_size)
        throw Error(ErrorCode::InvalidArgument, "frame token outside the model vocabulary");
}

// The fixed summation order keeps the batch and incremental paths identical.
template <typename T>
void merge_into(const TimelineFrame& frame, int position, const Parameters<T>& p, VisualMode mode, T* out,
                T* tmp) {
    const auto& c = p.config;
    const auto& L = p.lay();
    const int d = c.d_model;
    if (position < 0 || position >= c.max_frames)
        throw Error(ErrorCode::FrameOutOfRange, "position " + std::to_string(position) + " outside max_frames " +
                                                    std::to_string(c.max_frames));
    check_frame<T>(frame, c.vocab);
    add_row(p.at(L.emb_listen + sz(frame.listen) * sz(d)), p.at(L.emb_speak + sz(frame.speak) * sz(d)), d, out);
    add_row(out, p.at(L.emb_text + sz(frame.text) * sz(d)), d, out);
    add_row(out, p.at(L.emb_action + sz(frame.action) * sz(d)), d, out);
    add_row(out, p.at(L.pos + sz(position) * sz(d)), d, out);
    if (mode == VisualMode::Stream && frame.visual) {
        encode_visual_row(p.scenes->at(*frame.visual), p, tmp);
        add_row(out, tmp, d, out);
    }
}

template <typename T>
void prefix_into(const T* embedding, int position, const Parameters<T>& p, T* out) {
    const int d = p.config.d_model;
    add_row(embedding, p.at(p.lay().pos + sz(position) * sz(d)), d, out);
}

template <typename T>
void resize_tape(Tape<T>& tp, const ModelConfig& c, int n) {
    const std::size_t nd = sz(n) * sz(c.d_model);
    const std::size_t nf = sz(n) * sz(c.d_ff);
    tp.n = n;
    tp.x0.resize(nd);
    tp.layers.resize(sz(c.n_layers));
    for (auto& l : tp.layers) {
        for (auto* v : {&l.x_in, &l.ln1, &l.ln1_hat, &l.q, &l.k, &l.v, &l.att, &l.x_mid, &l.ln2, &l.ln2_hat})
            v->resize(nd);
        l.ln1_rstd.resize(sz(n));
        l.ln2_rstd.resize(sz(n));
        l.probs.resize(sz(c.n_heads) * sz(n) * sz(n));
        l.ff_pre.resize(nf);
        l.ff_act.resize(nf);
        if (tp.dropout > 0) {
            l.keep_att.resize(nd);
            l.keep_ff.resize(nd);
        }
    }
    tp.x_out.resize(nd);
    tp.hidden.resize(nd);
    tp.lnf_hat.resize(nd);
    tp.lnf_rstd.resize(sz(n));
}

// Runs the layer stack over tape.x0 and fills the frame outputs.
template <typename T>
ForwardOutput<T> run_stack(const Parameters<T>& p, Tape<T>& tp) {
    const auto& c = p.config;
    const auto& L = p.lay();
    const int n = tp.n;
    const int d = c.d_model;
    const int f = c.d_ff;
    std::vector<T> tmp(sz(std::max(d, f)));

    std::copy(tp.x0.begin(), tp.x0.end(), tp.layers[0].x_in.begin());
    for (int li = 0; li < c.n_layers; ++li) {
        auto& l = tp.layers[sz(li)];
        const auto& o = L.layers[sz(li)];
        for (int r = 0; r < n; ++r) {
            const std::size_t rd = sz(r) * sz(d);
            layernorm_row(l.x_in.data() + rd, p.at(o.ln1_g), p.at(o.ln1_b), d, l.ln1.data() + rd,
                          l.ln1_hat.data() + rd, l.ln1_rstd.data() + r);
            affine_row(l.ln1.data() + rd, p.at(o.wq), p.at(o.bq), d, d, l.q.data() + rd);
            affine_row(l.ln1.data() + rd, p.at(o.wk), p.at(o.bk), d, d, l.k.data() + rd);
            affine_row(l.ln1.data() + rd, p.at(o.wv), p.at(o.bv), d, d, l.v.data() + rd);
        }
        for (int r = 0; r < n; ++r) {
            const std::size_t rd = sz(r) * sz(d);
            attend_row(l.q.data() + rd, l.k.data(), l.v.data(), r + 1, d, c.n_heads, l.probs.data() + sz(r) * sz(n),
                       sz(n) * sz(n), l.att.data() + rd);
            affine_row(l.att.data() + rd, p.at(o.wo), p.at(o.bo), d, d, tmp.data());
            if (tp.dropout > 0)
                for (int i = 0; i < d; ++i) tmp[sz(i)] *= l.keep_att[rd + sz(i)];
            add_row(l.x_in.data() + rd, tmp.data(), d, l.x_mid.data() + rd);
            layernorm_row(l.x_mid.data() + rd, p.at(o.ln2_g), p.at(o.ln2_b), d, l.ln2.data() + rd,
                          l.ln2_hat.data() + rd, l.ln2_rstd.data() + r);
            const std::size_t rf = sz(r) * sz(f);
            affine_row(l.ln2.data() + rd, p.at(o.w1), p.at(o.b1), d, f, l.ff_pre.data() + rf);
            gelu_row(l.ff_pre.data() + rf, f, l.ff_act.data() + rf);
            affine_row(l.ff_act.data() + rf, p.at(o.w2), p.at(o.b2), f, d, tmp.data());
            if (tp.dropout > 0)
                for (int i = 0; i < d; ++i) tmp[sz(i)] *= l.keep_ff[rd + sz(i)];
            T* next = li + 1 < c.n_layers ? tp.layers[sz(li + 1)].x_in.data() : tp.x_out.data();
            add_row(l.x_mid.data() + rd, tmp.data(), d, next + rd);
        }
    }

    ForwardOutput<T> out;
    const int frames = n - tp.m;
    out.frames = frames;
    out.d_model = d;
    out.text_size = c.vocab.text_size;
    out.audio_size = c.vocab.audio_size;
    out.action_size = c.vocab.action_size;
    out.hidden.resize(sz(frames) * sz(d));
    out.text.resize(sz(frames) * sz(out.text_size));
    out.speak.resize(sz(frames) * sz(out.audio_size));
    out.action.resize(sz(frames) * sz(out.action_size));
    for (int r = 0; r < n; ++r) {
        const std::size_t rd = sz(r) * sz(d);
        layernorm_row(tp.x_out.data() + rd, p.at(L.lnf_g), p.at(L.lnf_b), d, tp.hidden.data() + rd,
                      tp.lnf_hat.data() + rd, tp.lnf_rstd.data() + r);
    }
    for (int t = 0; t < frames; ++t) {
        const T* h = tp.hidden.data() + sz(tp.m + t) * sz(d);
        std::copy(h, h + d, out.hidden.data() + sz(t) * sz(d));
        apply_heads(h, p, out.text.data() + sz(t) * sz(out.text_size), out.speak.data() + sz(t) * sz(out.audio_size),
                    out.action.data() + sz(t) * sz(out.action_size));
    }
    return out;
}

template <typename T>
void transpose_into(const T* w, int in, int out, std::vector<T>& dst) {
    dst.resize(sz(in) * sz(out));
    for (int i = 0; i < in; ++i)
        for (int j = 0; j < out; ++j) dst[sz(j) * sz(in) + sz(i)] = w[sz(i) * sz(out) + sz(j)];
}

// dX += dY W^T using the transposed copy wt ([out][in]).
template <typename T>
void back_input(const T* dy, const T* wt, int n, int in, int out, T* dx) {
    for (int r = 0; r < n; ++r) {
        const T* g = dy + sz(r) * sz(out);
        T* o = dx + sz(r) * sz(in);
        for (int j = 0; j < out; ++j) {
            if (g[j] != T(0)) axpy(in, g[j], wt + sz(j) * sz(in), o);
        }
    }
}

// dW += X^T dY, db += sum of dY rows.
template <typename T>
void back_weight(const T* x, const T* dy, int n, int in, int out, T* dw, T* db) {
    for (int r = 0; r < n; ++r) {
        const T* xr = x + sz(r) * sz(in);
        const T* g = dy + sz(r) * sz(out);
        for (int i = 0; i < in; ++i) {
            if (xr[i] != T(0)) axpy(out, xr[i], g, dw + sz(i) * sz(out));
        }
        axpy(out, T(1), g, db);
    }
}

// Backward through y = g * hat + b for n rows; accumulates into dx.
template <typename T>
void back_layernorm(const T* dy, const T* hat, const T* rstd, const T* g, int n, int d, T* dx, T* dg, T* db,
                    T* scratch) {
    for (int r = 0; r < n; ++r) {
        const T* gy = dy + sz(r) * sz(d);
        const T* h = hat + sz(r) * sz(d);
        T s1 = 0, s2 = 0;
        for (int i = 0; i < d; ++i) {
            dg[i] += gy[i] * h[i];
            db[i] += gy[i];
            scratch[i] = gy[i] * g[i];
            s1 += scratch[i];
            s2 += scratch[i] * h[i];
        }
        s1 /= static_cast<T>(d);
        s2 /= static_cast<T>(d);
        T* o = dx + sz(r) * sz(d);
        for (int i = 0; i < d; ++i) o[i] += rstd[r] * (scratch[i] - s1 - h[i] * s2);
    }
}

} // namespace

template <typename T>
VisualContext<T> encode_visual_context(const std::vector<SceneVector>& scenes, const Parameters<T>& p) {
    VisualContext<T> ctx;
    for (const auto& s : scenes) {
        std::vector<T> e(sz(p.config.d_model));
        encode_visual_row(s, p, e.data());
        ctx.embeddings.push_back(std::move(e));
    }
    return ctx;
}

template <typename T>
std::vector<T> encode_visual_stream(const SceneVector& scene, const Parameters<T>& p) {
    std::vector<T> e(sz(p.config.d_model));
    encode_visual_row(scene, p, e.data());
    return e;
}

template <typename T>
std::vector<T> merge_inputs(const TimelineFrame& frame, int position, const Parameters<T>& p, VisualMode mode) {
    std::vector<T> out(sz(p.config.d_model)), tmp(sz(p.config.d_model));
    merge_into(frame, position, p, mode, out.data(), tmp.data());
    return out;
}

template <typename T>
void apply_heads(const T* hidden, const Parameters<T>& p, T* text, T* speak, T* action) {
    const auto& L = p.lay();
    const auto& v = p.config.vocab;
    const int d = p.config.d_model;
    affine_row(hidden, p.at(L.text_w), p.at(L.text_b), d, v.text_size, text);
    affine_row(hidden, p.at(L.speak_w), p.at(L.speak_b), d, v.audio_size, speak);
    affine_row(hidden, p.at(L.action_w), p.at(L.action_b), d, v.action_size, action);
}

template <typename T>
ForwardOutput<T> forward_full(const Timeline& t, const VisualContext<std::type_identity_t<T>>* context,
                              const Parameters<T>& p) {
    Tape<T> tp;
    const auto& c = p.config;
    const int m = context ? context->size() : 0;
    const int n = m + t.size();
    if (n > c.max_frames)
        throw Error(ErrorCode::TooLong, std::to_string(n) + " positions exceed max_frames " +
                                            std::to_string(c.max_frames));
    tp.m = m;
    resize_tape(tp, c, n);
    const int d = c.d_model;
    std::vector<T> tmp(sz(d));
    for (int i = 0; i < m; ++i) {
        if (static_cast<int>(context->embeddings[sz(i)].size()) != d)
            throw Error(ErrorCode::DimMismatch, "context embedding width differs from d_model");
        prefix_into(context->embeddings[sz(i)].data(), i, p, tp.x0.data() + sz(i) * sz(d));
    }
    for (int f = 0; f < t.size(); ++f)
        merge_into(t[f], m + f, p, c.visual_mode, tp.x0.data() + sz(m + f) * sz(d), tmp.data());
    return run_stack(p, tp);
}

template <typename T>
ForwardOutput<T> forward_train(const Timeline& t, const std::vector<SceneVector>& context, const Parameters<T>& p,
                               Tape<T>& tp) {
    const auto& c = p.config;
    const int m = static_cast<int>(context.size());
    const int n = m + t.size();
    if (n > c.max_frames)
        throw Error(ErrorCode::TooLong, std::to_string(n) + " positions exceed max_frames " +
                                            std::to_string(c.max_frames));
    tp.m = m;
    tp.frames = t.frames;
    tp.context = context;
    resize_tape(tp, c, n);
    const int d = c.d_model;
    std::vector<T> tmp(sz(d));
    for (int i = 0; i < m; ++i) {
        encode_visual_row(context[sz(i)], p, tmp.data());
        prefix_into(tmp.data(), i, p, tp.x0.data() + sz(i) * sz(d));
    }
    for (int f = 0; f < t.size(); ++f)
        merge_into(t[f], m + f, p, c.visual_mode, tp.x0.data() + sz(m + f) * sz(d), tmp.data());
    if (tp.dropout > 0) {
        Rng rng(tp.dropout_seed);
        const T keep = static_cast<T>(1.0 / (1.0 - tp.dropout));
        for (auto& l : tp.layers) {
            for (auto* mask : {&l.keep_att, &l.keep_ff})
                for (auto& k : *mask) k = rng.bernoulli(tp.dropout) ? T(0) : keep;
        }
    }
    return run_stack(p, tp);
}

template <typename T>
DecodeCache<T> new_cache(const Parameters<T>& p, const VisualContext<std::type_identity_t<T>>* context) {
    const auto& c = p.config;
    DecodeCache<T> cache;
    cache.capacity = c.max_frames;
    cache.keys.assign(sz(c.n_layers), std::vector<T>(sz(c.max_frames) * sz(c.d_model)));
    cache.values.assign(sz(c.n_layers), std::vector<T>(sz(c.max_frames) * sz(c.d_model)));
    // x, a, q, att, tmp, x_mid, ff, probs
    cache.scratch.resize(sz(6 * c.d_model + 2 * c.d_ff + c.n_heads * c.max_frames));
    const int m = context ? context->size() : 0;
    if (m > c.max_frames) throw Error(ErrorCode::TooLong, "visual context exceeds max_frames");
    if (m == 0) return cache;

    // Prime the prefix through the batch path; its keys and values are what
    // forward_full would compute for the same positions.
    Tape<T> tp;
    tp.m = m;
    resize_tape(tp, c, m);
    const int d = c.d_model;
    for (int i = 0; i < m; ++i) {
        if (static_cast<int>(context->embeddings[sz(i)].size()) != d)
            throw Error(ErrorCode::DimMismatch, "context embedding width differs from d_model");
        prefix_into(context->embeddings[sz(i)].data(), i, p, tp.x0.data() + sz(i) * sz(d));
    }
    run_stack(p, tp);
    for (int li = 0; li < c.n_layers; ++li) {
        std::copy(tp.layers[sz(li)].k.begin(), tp.layers[sz(li)].k.end(), cache.keys[sz(li)].begin());
        std::copy(tp.layers[sz(li)].v.begin(), tp.layers[sz(li)].v.end(), cache.values[sz(li)].begin());
    }
    cache.prefix = m;
    return cache;
}

template <typename T>
StepOutput<T> decode_step(DecodeCache<T>& cache, const TimelineFrame& frame, const Parameters<T>& p) {
    const auto& c = p.config;
    const auto& L = p.lay();
    const int pos = cache.positions();
    if (pos + 1 > cache.capacity || pos + 1 > c.max_frames)
        throw Error(ErrorCode::TooLong, "decode cache is full at " + std::to_string(pos) + " positions");
    const int d = c.d_model;
    const int f = c.d_ff;
    T* x = cache.scratch.data();
    T* a = x + d;
    T* q = a + d;
    T* att = q + d;
    T* tmp = att + d;
    T* x_mid = tmp + d;
    T* ff_pre = x_mid + d;
    T* ff_act = ff_pre + f;
    T* probs = ff_act + f;

    merge_into(frame, pos, p, c.visual_mode, x, tmp);
    for (int li = 0; li < c.n_layers; ++li) {
        const auto& o = L.layers[sz(li)];
        T* keys = cache.keys[sz(li)].data();
        T* values = cache.values[sz(li)].data();
        const std::size_t rd = sz(pos) * sz(d);
        layernorm_row(x, p.at(o.ln1_g), p.at(o.ln1_b), d, a, tmp, static_cast<T*>(nullptr));
        affine_row(a, p.at(o.wq), p.at(o.bq), d, d, q);
        affine_row(a, p.at(o.wk), p.at(o.bk), d, d, keys + rd);
        affine_row(a, p.at(o.wv), p.at(o.bv), d, d, values + rd);
        attend_row(q, keys, values, pos + 1, d, c.n_heads, probs, sz(c.max_frames), att);
        affine_row(att, p.at(o.wo), p.at(o.bo), d, d, tmp);
        add_row(x, tmp, d, x_mid);
        layernorm_row(x_mid, p.at(o.ln2_g), p.at(o.ln2_b), d, a, tmp, static_cast<T*>(nullptr));
        affine_row(a, p.at(o.w1), p.at(o.b1), d, f, ff_pre);
        gelu_row(ff_pre, f, ff_act);
        affine_row(ff_act, p.at(o.w2), p.at(o.b2), f, d, tmp);
        add_row(x_mid, tmp, d, x);
    }
    StepOutput<T> out;
    out.hidden.resize(sz(d));
    layernorm_row(x, p.at(L.lnf_g), p.at(L.lnf_b), d, out.hidden.data(), tmp, static_cast<T*>(nullptr));
    out.text.resize(sz(c.vocab.text_size));
    out.speak.resize(sz(c.vocab.audio_size));
    out.action.resize(sz(c.vocab.action_size));
    apply_heads(out.hidden.data(), p, out.text.data(), out.speak.data(), out.action.data());
    ++cache.frames;
    return out;
}

template <typename T>
BackwardWeights<T> prepare_backward(const Parameters<T>& p) {
    const auto& c = p.config;
    const auto& L = p.lay();
    const int d = c.d_model;
    BackwardWeights<T> bw;
    bw.layers.resize(sz(c.n_layers));
    for (int li = 0; li < c.n_layers; ++li) {
        const auto& o = L.layers[sz(li)];
        auto& t = bw.layers[sz(li)];
        transpose_into(p.at(o.wq), d, d, t.wq);
        transpose_into(p.at(o.wk), d, d, t.wk);
        transpose_into(p.at(o.wv), d, d, t.wv);
        transpose_into(p.at(o.wo), d, d, t.wo);
        transpose_into(p.at(o.w1), d, c.d_ff, t.w1);
        transpose_into(p.at(o.w2), c.d_ff, d, t.w2);
    }
    transpose_into(p.at(L.text_w), d, c.vocab.text_size, bw.text);
    transpose_into(p.at(L.speak_w), d, c.vocab.audio_size, bw.speak);
    transpose_into(p.at(L.action_w), d, c.vocab.action_size, bw.action);
    return bw;
}

template <typename T>
void backward(const Tape<T>& tp, const Parameters<T>& p, const BackwardWeights<T>& bw, const HeadGrads<T>& dy,
              std::vector<T>& grad) {
    const auto& c = p.config;
    const auto& L = p.lay();
    const auto& v = c.vocab;
    const int n = tp.n;
    const int m = tp.m;
    const int frames = n - m;
    const int d = c.d_model;
    const int f = c.d_ff;
    const int H = c.n_heads;
    const int dh = d / H;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    if (grad.size() != p.values.size()) grad.assign(p.values.size(), T(0));
    T* g = grad.data();

    // Heads read only the frame positions.
    std::vector<T> dh_buf(sz(n) * sz(d), T(0));
    const T* hid = tp.hidden.data() + sz(m) * sz(d);
    T* dhid = dh_buf.data() + sz(m) * sz(d);
    back_input(dy.text.data(), bw.text.data(), frames, d, v.text_size, dhid);
    back_weight(hid, dy.text.data(), frames, d, v.text_size, g + L.text_w, g + L.text_b);
    back_input(dy.speak.data(), bw.speak.data(), frames, d, v.audio_size, dhid);
    back_weight(hid, dy.speak.data(), frames, d, v.audio_size, g + L.speak_w, g + L.speak_b);
    back_input(dy.action.data(), bw.action.data(), frames, d, v.action_size, dhid);
    back_weight(hid, dy.action.data(), frames, d, v.action_size, g + L.action_w, g + L.action_b);

    std::vector<T> scratch(sz(std::max(d, f)));
    std::vector<T> dx(sz(n) * sz(d), T(0));
    back_layernorm(dh_buf.data(), tp.lnf_hat.data(), tp.lnf_rstd.data(), p.at(L.lnf_g), n, d, dx.data(),
                   g + L.lnf_g, g + L.lnf_b, scratch.data());

    std::vector<T> d_act(sz(n) * sz(f)), d_ln(sz(n) * sz(d)), dx_mid(sz(n) * sz(d)), d_att(sz(n) * sz(d));
    std::vector<T> dq(sz(n) * sz(d)), dk(sz(n) * sz(d)), dv(sz(n) * sz(d));
    std::vector<T> d_drop(tp.dropout > 0 ? sz(n) * sz(d) : 0);
    for (int li = c.n_layers - 1; li >= 0; --li) {
        const auto& l = tp.layers[sz(li)];
        const auto& o = L.layers[sz(li)];
        const auto& t = bw.layers[sz(li)];

        // Feed-forward block.
        const T* d_ff_out = dx.data();
        if (tp.dropout > 0) {
            for (std::size_t i = 0; i < d_drop.size(); ++i) d_drop[i] = dx[i] * l.keep_ff[i];
            d_ff_out = d_drop.data();
        }
        std::fill(d_act.begin(), d_act.end(), T(0));
        back_input(d_ff_out, t.w2.data(), n, f, d, d_act.data());
        back_weight(l.ff_act.data(), d_ff_out, n, f, d, g + o.w2, g + o.b2);
        for (std::size_t i = 0; i < d_act.size(); ++i) d_act[i] *= kernels::gelu_grad(l.ff_pre[i]);
        std::fill(d_ln.begin(), d_ln.end(), T(0));
        back_input(d_act.data(), t.w1.data(), n, d, f, d_ln.data());
        back_weight(l.ln2.data(), d_act.data(), n, d, f, g + o.w1, g + o.b1);
        dx_mid = dx;
        back_layernorm(d_ln.data(), l.ln2_hat.data(), l.ln2_rstd.data(), p.at(o.ln2_g), n, d, dx_mid.data(),
                       g + o.ln2_g, g + o.ln2_b, scratch.data());

        // Attention block.
        const T* d_att_out = dx_mid.data();
        if (tp.dropout > 0) {
            for (std::size_t i = 0; i < d_drop.size(); ++i) d_drop[i] = dx_mid[i] * l.keep_att[i];
            d_att_out = d_drop.data();
        }
        std::fill(d_att.begin(), d_att.end(), T(0));
        back_input(d_att_out, t.wo.data(), n, d, d, d_att.data());
        back_weight(l.att.data(), d_att_out, n, d, d, g + o.wo, g + o.bo);
        std::fill(dq.begin(), dq.end(), T(0));
        std::fill(dk.begin(), dk.end(), T(0));
        std::fill(dv.begin(), dv.end(), T(0));
        std::vector<T> dp(sz(n));
        for (int h = 0; h < H; ++h) {
            for (int r = 0; r < n; ++r) {
                const T* P = l.probs.data() + (sz(h) * sz(n) + sz(r)) * sz(n);
                const T* dc = d_att.data() + sz(r) * sz(d) + sz(h * dh);
                T s = 0;
                for (int j = 0; j <= r; ++j) {
                    const T* vj = l.v.data() + sz(j) * sz(d) + sz(h * dh);
                    T acc = 0;
                    for (int i = 0; i < dh; ++i) acc += dc[i] * vj[i];
                    dp[sz(j)] = acc;
                    s += P[j] * acc;
                }
                const T* qr = l.q.data() + sz(r) * sz(d) + sz(h * dh);
                T* dqr = dq.data() + sz(r) * sz(d) + sz(h * dh);
                for (int j = 0; j <= r; ++j) {
                    const T ds = P[j] * (dp[sz(j)] - s) * scale;
                    const std::size_t jo = sz(j) * sz(d) + sz(h * dh);
                    axpy(dh, ds, l.k.data() + jo, dqr);
                    axpy(dh, ds, qr, dk.data() + jo);
                    axpy(dh, P[j], dc, dv.data() + jo);
                }
            }
        }
        std::fill(d_ln.begin(), d_ln.end(), T(0));
        back_input(dq.data(), t.wq.data(), n, d, d, d_ln.data());
        back_input(dk.data(), t.wk.data(), n, d, d, d_ln.data());
        back_input(dv.data(), t.wv.data(), n, d, d, d_ln.data());
        back_weight(l.ln1.data(), dq.data(), n, d, d, g + o.wq, g + o.bq);
        back_weight(l.ln1.data(), dk.data(), n, d, d, g + o.wk, g + o.bk);
        back_weight(l.ln1.data(), dv.data(), n, d, d, g + o.wv, g + o.bv);
        dx = dx_mid;
        back_layernorm(d_ln.data(), l.ln1_hat.data(), l.ln1_rstd.data(), p.at(o.ln1_g), n, d, dx.data(),
                       g + o.ln1_g, g + o.ln1_b, scratch.data());
    }

    // Input embeddings.
    auto visual_grad = [&](const SceneVector& s, const T* gr) {
        for (int i = 0; i < c.d_v; ++i) axpy(d, static_cast<T>(s.features[sz(i)]), gr, g + L.vis_w + sz(i) * sz(d));
        axpy(d, T(1), gr, g + L.vis_b);
    };
    for (int r = 0; r < n; ++r) {
        const T* gr = dx.data() + sz(r) * sz(d);
        axpy(d, T(1), gr, g + L.pos + sz(r) * sz(d));
        if (r < m) {
            visual_grad(tp.context[sz(r)], gr);
            continue;
        }
        const auto& fr = tp.frames[sz(r - m)];
        axpy(d, T(1), gr, g + L.emb_listen + sz(fr.listen) * sz(d));
        axpy(d, T(1), gr, g + L.emb_speak + sz(fr.speak) * sz(d));
        axpy(d, T(1), gr, g + L.emb_text + sz(fr.text) * sz(d));
        axpy(d, T(1), gr, g + L.emb_action + sz(fr.action) * sz(d));
        if (c.visual_mode == VisualMode::Stream && fr.visual) visual_grad(p.scenes->at(*fr.visual), gr);
    }
}

#define FDX_INSTANTIATE(T)                                                                                      \
    template VisualContext<T> encode_visual_context(const std::vector<SceneVector>&, const Parameters<T>&);      \
    template std::vector<T> encode_visual_stream(const SceneVector&, const Parameters<T>&);                      \
    template std::vector<T> merge_inputs(const TimelineFrame&, int, const Parameters<T>&, VisualMode);           \
    template void apply_heads(const T*, const Parameters<T>&, T*, T*, T*);                                       \
    template ForwardOutput<T> forward_full(const Timeline&, const VisualContext<T>*, const Parameters<T>&);      \
    template ForwardOutput<T> forward_train(const Timeline&, const std::vector<SceneVector>&,                    \
                                            const Parameters<T>&, Tape<T>&);                                     \
    template DecodeCache<T> new_cache(const Parameters<T>&, const VisualContext<T>*);                            \
    template StepOutput<T> decode_step(DecodeCache<T>&, const TimelineFrame&, const Parameters<T>&);             \
    template BackwardWeights<T> prepare_backward(const Parameters<T>&);                                          \
    template void backward(const Tape<T>&, const Parameters<T>&, const BackwardWeights<T>&, const HeadGrads<T>&, \
                           std::vector<T>&);

FDX_INSTANTIATE(float)
FDX_INSTANTIATE(double)

#undef FDX_INSTANTIATE

} // namespace fdx::model
