// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "audiokv/fixtures.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "audiokv/error.hpp"
#include "audiokv/rng.hpp"

namespace audiokv {

namespace {

std::string random_word(Rng& rng) {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    const std::size_t syllables = 2 + rng.uniform_int(0, 3);
    std::string word;
    for (std::size_t s = 0; s < syllables; ++s) {
        word.push_back(consonants[rng.uniform_int(0, consonants.size())]);
        word.push_back(vowels[rng.uniform_int(0, vowels.size())]);
    }
    return word;
}

// Splits `word` into `pieces` nearly equal sub-word tokens.
std::vector<std::string> split_word(const std::string& word, std::size_t pieces) {
    std::vector<std::string> out;
    const std::size_t base = word.size() / pieces;
    const std::size_t extra = word.size() % pieces;
    std::size_t pos = 0;
    for (std::size_t p = 0; p < pieces; ++p) {
        const std::size_t len = base + (p < extra ? 1 : 0);
        out.push_back(word.substr(pos, len));
        pos += len;
    }
    return out;
}

std::vector<std::size_t> choose_planted(Rng& rng, std::size_t slots, double fraction) {
    if (fraction <= 0.0) {
        return {};
    }
    const auto count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(slots))), 1, slots);
    std::vector<std::size_t> order(slots);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        std::swap(order[i], order[i + rng.uniform_int(0, slots - i)]);
    }
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

struct HeadShape {
    bool planted = false;
    double plateau_start = 0.0;
    double plateau_width = 0.0;
    std::vector<double> base;  // sink, plateau and heavy hitters, length Lmax
};

}  // namespace

FixtureParams profile_params(std::string_view profile) {
    FixtureParams p;
    if (profile == kProfileSpikePlateau) {
        return p;
    }
    if (profile == kProfileSpecializedHeads) {
        p.num_words = 24;
        p.clusters = 0;
        p.planted = {0.05, 0.15, 0.7, 0.1, 0.0, 0.0};
        p.background = {0.4, 0.1, 0.0, 0.2, 0.0, 0.3};
        return p;
    }
    if (profile == kProfileUniform) {
        p.num_words = 24;
        p.uniform = true;
        p.planted_fraction = 0.0;
        p.epoch_jitter = 0.0;
        return p;
    }
    throw ConfigError("unknown fixture profile '" + std::string(profile) +
                      "' (expected specialized-heads, spike-plateau or uniform)");
}

Fixture generate_fixture(std::string_view profile, std::uint64_t seed) {
    return generate_fixture(profile_params(profile), seed);
}

Fixture generate_fixture(const FixtureParams& params, std::uint64_t seed) {
    if (params.num_layers == 0 || params.num_heads == 0 || params.num_words == 0 ||
        params.tokens_per_word == 0 || params.audio_start == 0) {
        throw ConfigError("fixture dimensions must be positive");
    }
    Rng rng(seed);
    const std::size_t slots = params.num_layers * params.num_heads;
    const std::size_t a0 = params.audio_start;
    const std::size_t n_audio = params.num_words * params.tokens_per_word;
    const std::size_t prefix = a0 + n_audio + params.prompt_tokens;

    Fixture fixture;
    fixture.planted_heads = choose_planted(rng, slots, params.planted_fraction);

    // Words, their sub-word tokens and the word each decoding step belongs to.
    std::vector<std::size_t> tokens_of_word(params.num_words);
    std::size_t num_steps = 0;
    for (auto& k : tokens_of_word) {
        k = 1 + rng.uniform_int(0, 3);
        num_steps += k;
    }
    const std::size_t min_steps = params.first_epoch_steps + params.min_future_steps;
    if (num_steps < min_steps) {
        tokens_of_word.back() += min_steps - num_steps;
        num_steps = min_steps;
    }
    std::vector<std::string> word_texts(params.num_words);
    std::vector<std::string> step_texts;
    std::vector<std::size_t> step_word;
    for (std::size_t w = 0; w < params.num_words; ++w) {
        std::string text = random_word(rng);
        while (text.size() < tokens_of_word[w]) {
            text += random_word(rng);
        }
        const auto pieces = split_word(text, tokens_of_word[w]);
        for (std::size_t p = 0; p < pieces.size(); ++p) {
            step_texts.push_back((p == 0 && w > 0 ? " " : "") + pieces[p]);
            step_word.push_back(w);
        }
        word_texts[w] = std::move(text);
    }

    const std::size_t max_length = prefix + num_steps;
    std::vector<HeadShape> heads(slots);
    for (std::size_t slot = 0; slot < slots; ++slot) {
        HeadShape& shape = heads[slot];
        shape.planted = std::binary_search(fixture.planted_heads.begin(),
                                           fixture.planted_heads.end(), slot);
        const FixtureParams::Mix& mix = shape.planted ? params.planted : params.background;
        shape.base.assign(max_length, 0.0);
        if (params.uniform) {
            std::fill(shape.base.begin(), shape.base.end(), 1.0);
            continue;
        }
        const double n = static_cast<double>(n_audio);
        shape.plateau_width = rng.uniform(params.plateau_min, params.plateau_max) * n;
        shape.plateau_start = static_cast<double>(a0) + rng.uniform(0.0, n - shape.plateau_width);
        const double edge = shape.plateau_width * params.plateau_edge;
        std::vector<double> plateau(max_length, 0.0);
        double plateau_sum = 0.0;
        for (std::size_t x = a0; x < a0 + n_audio; ++x) {
            const double pos = static_cast<double>(x);
            const double inside =
                std::min(pos - shape.plateau_start, shape.plateau_start + shape.plateau_width - pos);
            plateau[x] = std::clamp(inside / edge + 0.5, 0.0, 1.0);
            plateau_sum += plateau[x];
        }
        for (std::size_t x = 0; x < a0; ++x) {
            shape.base[x] = mix.sink / static_cast<double>(a0);
        }
        if (plateau_sum > 0.0) {
            for (std::size_t x = a0; x < a0 + n_audio; ++x) {
                shape.base[x] += mix.plateau * plateau[x] / plateau_sum;
            }
        }
        // Heavy hitters sit in the text prompt between audio and generation.
        for (std::size_t j = 0; j < params.heavy_hitters && params.prompt_tokens > 0; ++j) {
            const std::size_t x = a0 + n_audio + rng.uniform_int(0, params.prompt_tokens);
            if (mix.heavy > 0.0) {
                shape.base[x] = mix.heavy / static_cast<double>(params.heavy_hitters);
            }
        }
    }

    const auto hot_width = static_cast<std::size_t>(params.hot_zone * static_cast<double>(n_audio));
    std::vector<std::vector<double>> clusters(slots);
    std::vector<std::vector<double>> epoch_jitter(slots);
    std::size_t current_epoch = static_cast<std::size_t>(-1);

    std::vector<DecodingStep> steps(num_steps);
    for (std::size_t t = 0; t < num_steps; ++t) {
        const std::size_t epoch = t < params.first_epoch_steps
                                      ? 0
                                      : 1 + (t - params.first_epoch_steps) / params.epoch_steps;
        if (epoch != current_epoch) {
            current_epoch = epoch;
            for (std::size_t slot = 0; slot < slots; ++slot) {
                const HeadShape& shape = heads[slot];
                const FixtureParams::Mix& mix = shape.planted ? params.planted : params.background;
                clusters[slot].assign(max_length, 0.0);
                if (!params.uniform && params.clusters > 0 && hot_width > params.cluster_width) {
                    // Dense clusters inside a hot zone that avoids the plateau.
                    std::size_t zone = a0;
                    for (int attempt = 0; attempt < 10000; ++attempt) {
                        const std::size_t z = a0 + rng.uniform_int(0, n_audio - hot_width);
                        const double zs = static_cast<double>(z);
                        if (zs + static_cast<double>(hot_width) < shape.plateau_start ||
                            zs > shape.plateau_start + shape.plateau_width) {
                            zone = z;
                            break;
                        }
                    }
                    const double each = mix.clusters / static_cast<double>(params.clusters) /
                                        static_cast<double>(params.cluster_width);
                    for (std::size_t c = 0; c < params.clusters; ++c) {
                        const std::size_t s =
                            zone + rng.uniform_int(0, hot_width - params.cluster_width);
                        for (std::size_t x = s; x < s + params.cluster_width; ++x) {
                            clusters[slot][x] += each;
                        }
                    }
                }
                epoch_jitter[slot].resize(max_length);
                for (double& j : epoch_jitter[slot]) {
                    j = params.epoch_jitter > 0.0 ? rng.lognormal(0.0, params.epoch_jitter) : 1.0;
                }
            }
        }

        DecodingStep& step = steps[t];
        step.step_index = t;
        step.context_length = prefix + t;
        step.generated_token_text = step_texts[t];
        const std::size_t length = step.context_length;
        step.attention.resize(slots * length);
        const std::size_t word = step_word[t];
        const std::size_t span_start = a0 + word * params.tokens_per_word;
        const std::size_t span_end = span_start + params.tokens_per_word;
        const std::size_t recent = std::min(params.recent_tokens, length);

        std::vector<double> row(length);
        for (std::size_t slot = 0; slot < slots; ++slot) {
            const HeadShape& shape = heads[slot];
            const FixtureParams::Mix& mix = shape.planted ? params.planted : params.background;
            for (std::size_t x = 0; x < length; ++x) {
                row[x] = shape.base[x] + clusters[slot][x];
            }
            if (!params.uniform) {
                for (std::size_t x = span_start; x < span_end; ++x) {
                    row[x] += mix.word / static_cast<double>(params.tokens_per_word);
                }
                for (std::size_t x = length - recent; x < length; ++x) {
                    row[x] += mix.recent / static_cast<double>(recent);
                }
            }
            double sum = 0.0;
            for (std::size_t x = 0; x < length; ++x) {
                const double step_noise =
                    params.step_jitter > 0.0 ? rng.lognormal(0.0, params.step_jitter) : 1.0;
                row[x] *= epoch_jitter[slot][x] * step_noise;
                sum += row[x];
            }
            float* out = step.attention.data() + slot * length;
            for (std::size_t x = 0; x < length; ++x) {
                out[x] = static_cast<float>(row[x] / sum);
            }
        }
    }

    AttentionTrace::Header header;
    header.num_layers = params.num_layers;
    header.num_heads = params.num_heads;
    header.audio_start = a0;
    header.audio_count = n_audio;
    header.total_duration_s = static_cast<double>(n_audio) * params.seconds_per_token;
    fixture.trace = AttentionTrace::create(header, std::move(steps));

    const double dt = params.seconds_per_token;
    const double span = static_cast<double>(params.tokens_per_word);
    for (std::size_t w = 0; w < params.num_words; ++w) {
        WordAlignment word;
        word.text = word_texts[w];
        if (w == 0) {
            word.text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word.text[0])));
        }
        if (w + 1 == params.num_words) {
            word.text += ".";
        } else if (rng.uniform() < 0.1) {
            word.text += ",";
        }
        word.t_start = (static_cast<double>(w) * span + 0.25) * dt;
        word.t_end = (static_cast<double>(w + 1) * span - 0.5) * dt;
        word.confidence = rng.uniform() < params.low_confidence_share ? rng.uniform(0.5, 0.95)
                                                                      : rng.uniform(0.95, 1.0);
        fixture.words.push_back(std::move(word));
    }
    return fixture;
}

}  // namespace audiokv
