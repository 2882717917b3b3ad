#include "lwipsm/meter.hpp"

#include <algorithm>
#include <cmath>

#include "lwipsm/errors.hpp"

namespace lwipsm {

void NoiseParams::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidParameter("privacy budget must be positive");
    if (!(delta_c > 0.0) || !std::isfinite(delta_c)) throw InvalidParameter("sensitivity must be positive");
    if (!(nsc >= 0.0) || !std::isfinite(nsc)) throw InvalidParameter("noise scale must be non-negative");
}

NoiseParams NoiseParams::for_program(const Program& pr, double epsilon, double p_max_kwh_per_h) {
    NoiseParams np;
    np.epsilon = epsilon;
    np.delta_c = (24.0 / pr.freq) * p_max_kwh_per_h;
    np.nsc = pr.nsc;
    np.validate();
    return np;
}

double sample_noise(const NoiseParams& np, Rng& rng) { return rng.normal(0.0, np.sigma_hat()); }

CoarseReading perturb(const CoarseReading& c, const NoiseParams& np, Rng& rng) {
    np.validate();
    CoarseReading out = c;
    if (np.nsc == 0.0) {
        out.noisy = false;
        return out;
    }
    out.value = c.value + sample_noise(np, rng);
    out.noisy = true;
    if (out.value < 0.0) {
        out.value = 0.0;
        out.clamped = true;
    }
    return out;
}

CoarseReading aggregate(std::span<const Reading> window, std::uint32_t freq, DateTime window_start,
                        std::uint32_t interval_index, MissingDataPolicy policy) {
    if (std::find(allowed_frequencies.begin(), allowed_frequencies.end(), freq) == allowed_frequencies.end())
        throw InvalidParameter("unsupported reporting frequency " + std::to_string(freq));
    const Duration length{86400 / static_cast<std::int64_t>(freq)};
    const auto slots = static_cast<std::size_t>(length.seconds / reading_interval.seconds);

    std::vector<const Reading*> slot(slots, nullptr);
    for (const auto& r : window) {
        const auto offset = (r.timestamp - window_start).seconds;
        if (offset < 0 || offset >= length.seconds)
            throw ProtocolError("reading at " + r.timestamp.iso() + " lies outside the window");
        if (offset % reading_interval.seconds != 0)
            throw ProtocolError("reading at " + r.timestamp.iso() + " is off the 15-minute grid");
        auto& s = slot[static_cast<std::size_t>(offset / reading_interval.seconds)];
        if (s) throw ProtocolError("duplicate reading at " + r.timestamp.iso());
        s = &r;
    }

    CoarseReading c;
    c.interval_index = interval_index;
    c.window_start = window_start;
    c.window_end = window_start + length;

    std::vector<double> active(slots), reactive(slots);
    std::vector<bool> present(slots);
    for (std::size_t k = 0; k < slots; ++k) {
        if (slot[k]) {
            present[k] = true;
            active[k] = slot[k]->active_kwh;
            reactive[k] = slot[k]->reactive_kvarh;
            if (slot[k]->quality) c.quality = std::max(c.quality.value_or(0), *slot[k]->quality);
            if (slot[k]->firmware) c.firmware = slot[k]->firmware;
        }
    }
    const auto missing = static_cast<std::size_t>(std::count(present.begin(), present.end(), false));
    if (missing > 0) {
        if (policy == MissingDataPolicy::Strict) {
            auto k = static_cast<std::int64_t>(std::find(present.begin(), present.end(), false) - present.begin());
            throw ProtocolError("missing reading at " + (window_start + reading_interval * k).iso());
        }
        if (missing == slots) throw ProtocolError("window starting " + window_start.iso() + " has no readings");
        for (std::size_t k = 0; k < slots; ++k) {
            if (present[k]) continue;
            std::optional<std::size_t> lo, hi;
            for (std::size_t j = k; j-- > 0;)
                if (present[j]) { lo = j; break; }
            for (std::size_t j = k + 1; j < slots; ++j)
                if (present[j]) { hi = j; break; }
            auto lerp = [&](const std::vector<double>& v) {
                if (lo && hi) {
                    const double t = static_cast<double>(k - *lo) / static_cast<double>(*hi - *lo);
                    return v[*lo] + t * (v[*hi] - v[*lo]);
                }
                return v[lo ? *lo : *hi];
            };
            active[k] = lerp(active);
            reactive[k] = lerp(reactive);
        }
        c.interpolated = true;
    }
    c.value = 0.0;
    double q = 0.0;
    for (std::size_t k = 0; k < slots; ++k) {
        c.value += active[k];
        q += reactive[k];
    }
    c.reactive_kvarh = q;
    c.fields = all_fields;
    return c;
}

PurposeFieldMap default_purpose_fields() {
    return {{Purpose::DataDrivenServices, field_window},
            {Purpose::TariffSpecification, field_window},
            {Purpose::OperationalServices, static_cast<std::uint8_t>(field_window | field_quality)},
            {Purpose::Advertisement, 0}};
}

CoarseReading minimize(const CoarseReading& reading, Purpose prp, const PurposeFieldMap& fields) {
    auto it = fields.find(prp);
    const std::uint8_t keep = it == fields.end() ? 0 : it->second;
    CoarseReading out = reading;
    out.fields = reading.fields & keep;
    if (!out.has(field_window)) {
        out.window_start = DateTime{};
        out.window_end = DateTime{};
    }
    if (!out.has(field_quality)) out.quality.reset();
    if (!out.has(field_reactive)) out.reactive_kvarh.reset();
    if (!out.has(field_firmware)) out.firmware.reset();
    return out;
}

std::string_view to_string(MeterPhase p) {
    switch (p) {
        case MeterPhase::Idle: return "Idle";
        case MeterPhase::Enrolled: return "Enrolled";
        case MeterPhase::AwaitingGrant: return "AwaitingGrant";
        case MeterPhase::Reporting: return "Reporting";
        case MeterPhase::Done: return "Done";
        case MeterPhase::Aborted: return "Aborted";
        case MeterPhase::Cancelled: return "Cancelled";
    }
    return "?";
}

MeterAgent::MeterAgent(MeterId id, int rsa_bits, Rng rng, MeterConfig cfg)
    : id_(std::move(id)), rng_(std::move(rng)), cfg_(std::move(cfg)) {
    ScopedTimer t(elapsed_);
    keys_ = keygen(rsa_bits, rng_, id_);
    ++counters_.asym_keygens;
}

MeterAgent::MeterAgent(MeterId id, KeyPair keys, Rng rng, MeterConfig cfg)
    : id_(std::move(id)), keys_(std::move(keys)), rng_(std::move(rng)), cfg_(std::move(cfg)) {
    keys_.pub.key_id = id_;
    keys_.priv.key_id = id_;
}

void MeterAgent::connect(PublicKey up, PublicKey agg, std::shared_ptr<const KeyDirectory> directory) {
    up_pk_ = std::move(up);
    agg_pk_ = std::move(agg);
    directory_ = std::move(directory);
}

void MeterAgent::transition(MeterPhase next) {
    phase_ = next;
    history_.push_back(next);
}

void MeterAgent::abort(const std::string& why) {
    bf_.reset();
    transition(MeterPhase::Aborted);
    throw ProtocolError("integrity violation: " + why);
}

std::size_t MeterAgent::retained(const Envelope& e) {
    if (!cfg_.optimized) sent_.push_back(e.encode());
    return e.encoded_size();
}

std::vector<Program> MeterAgent::receive_catalog(ByteView catalog) {
    ScopedTimer t(elapsed_);
    auto programs = decode_catalog(catalog);
    std::erase_if(programs, [](const Program& p) { return !validate_program(p); });
    catalog_ = programs;
    return programs;
}

Envelope MeterAgent::enroll(const Program& pr) {
    ScopedTimer t(elapsed_);
    if (phase_ != MeterPhase::Idle) throw ProtocolError("meter " + id_ + " is already enrolled");
    if (!validate_program(pr)) throw InvalidParameter("enrollment rejected: program parameters are invalid");
    if (up_pk_.n.is_zero()) throw ProtocolError("meter " + id_ + " is not connected");

    program_ = pr;
    if (cfg_.optimized) catalog_.clear();
    const auto n = pr.reports();
    const auto seed = rng_.bytes<32>();
    ++counters_.random_generations;
    chain_ = build_chain(seed, n);
    counters_.hashes += n - 1;
    transition(MeterPhase::Enrolled);

    auto blinded = blind(view(chain_->last()), up_pk_, rng_);
    ++counters_.random_generations;
    ++counters_.arithmetic;
    bf_ = std::move(blinded.bf);

    EnrollmentRequest req;
    req.blinded = std::move(blinded.blinded);
    req.program = pr;
    req.meter_id = id_;
    req.sig = sign(keys_.priv, view(req.signed_part()));
    ++counters_.asym_ops;

    const auto plain = req.encode();
    auto env = envelope_encrypt(up_pk_, view(plain), rng_,
                                envelope_block_size(plain.size(), up_pk_, envelope_blocks(MessageKind::Enrollment)));
    ++counters_.asym_ops;
    retained(env);
    transition(MeterPhase::AwaitingGrant);
    return env;
}

void MeterAgent::process_grant(const Envelope& grant) {
    ScopedTimer t(elapsed_);
    if (phase_ != MeterPhase::AwaitingGrant) throw ProtocolError("meter " + id_ + " is not awaiting a grant");

    GrantMessage g;
    ++counters_.asym_ops;
    try {
        g = GrantMessage::decode(view(envelope_decrypt(keys_.priv, grant)));
    } catch (const DecryptionError& e) {
        abort(std::string("grant could not be decrypted: ") + e.what());
    } catch (const DecodeError& e) {
        abort(std::string("grant is malformed: ") + e.what());
    }

    ++counters_.asym_ops;
    if (!verify(up_pk_, view(g.signed_part()), g.sig)) abort("grant signature does not verify");
    ++counters_.asym_ops;
    if (!verify(up_pk_, view(g.token.bytes()), g.token_sig)) abort("token signature does not verify");

    auto sig = unblind(g.blinded_sig, *bf_);
    ++counters_.arithmetic;
    ++counters_.asym_ops;
    if (!verify(up_pk_, view(chain_->last()), sig)) abort("unblinded credential signature does not verify");

    up_sig_on_last_ = std::move(sig);
    token_ = g.token;
    token_sig_ = g.token_sig;
    bf_.reset();
    pseudonym_ = Pseudonym{rng_.bytes<16>()};
    ++counters_.random_generations;
    next_report_ = 0;
    transition(MeterPhase::Reporting);
}

void MeterAgent::process_grant(ByteView wire) {
    if (phase_ != MeterPhase::AwaitingGrant) throw ProtocolError("meter " + id_ + " is not awaiting a grant");
    Envelope e;
    try {
        e = Envelope::decode(wire);
    } catch (const DecodeError& err) {
        abort(std::string("grant is malformed: ") + err.what());
    }
    process_grant(e);
}

Envelope MeterAgent::generate_shared_key() {
    ScopedTimer t(elapsed_);
    if (phase_ != MeterPhase::Reporting) throw ProtocolError("meter " + id_ + " cannot generate a key now");
    KeyShare share;
    share.key = lwipsm::generate_shared_key(rng_);
    ++counters_.sym_keygens;
    share.generator = id_;
    share.sig = sign(keys_.priv, view(share.key.bytes));
    ++counters_.asym_ops;
    const auto plain = share.encode();
    auto env = envelope_encrypt(
        agg_pk_, view(plain), rng_,
        envelope_block_size(plain.size(), agg_pk_, envelope_blocks(MessageKind::SharedKeyProposal)));
    ++counters_.asym_ops;
    shared_key_ = share.key;
    retained(env);
    return env;
}

void MeterAgent::receive_shared_key(const Envelope& distribution) {
    ScopedTimer t(elapsed_);
    ++counters_.asym_ops;
    KeyShare share;
    try {
        share = KeyShare::decode(view(envelope_decrypt(keys_.priv, distribution)));
    } catch (const DecryptionError& e) {
        throw ProtocolError(std::string("shared key could not be decrypted: ") + e.what());
    } catch (const DecodeError& e) {
        throw ProtocolError(std::string("shared key message is malformed: ") + e.what());
    }
    ++counters_.asym_ops;
    if (!directory_ || !directory_->contains(share.generator) ||
        !verify(directory_->at(share.generator), view(share.key.bytes), share.sig))
        throw ProtocolError("shared key signature does not verify");
    shared_key_ = share.key;
}

void MeterAgent::receive_shared_key(ByteView wire) {
    Envelope e;
    try {
        e = Envelope::decode(wire);
    } catch (const DecodeError& err) {
        throw ProtocolError(std::string("shared key message is malformed: ") + err.what());
    }
    receive_shared_key(e);
}

void MeterAgent::cancel() {
    bf_.reset();
    transition(MeterPhase::Cancelled);
}

void MeterAgent::load_readings(std::vector<Reading> readings) {
    std::sort(readings.begin(), readings.end(),
              [](const Reading& a, const Reading& b) { return a.timestamp < b.timestamp; });
    readings_ = std::move(readings);
}

Envelope MeterAgent::build_report(std::size_t i) {
    ScopedTimer t(elapsed_);
    if (phase_ == MeterPhase::Done) throw ProtocolError("all reports already sent");
    if (phase_ != MeterPhase::Reporting) throw ProtocolError("meter " + id_ + " is not reporting");
    const auto& pr = *program_;
    const auto n = pr.reports();
    if (i >= n) throw ProtocolError("report index beyond the program's credential chain");
    if (i != next_report_) throw ProtocolError("report " + std::to_string(i) + " is not the next one due");
    if (!shared_key_) throw ProtocolError("no shared key for report authentication");

    const DateTime start = pr.pat + pr.window() * static_cast<std::int64_t>(i);
    const DateTime end = start + pr.window();
    auto lo = std::lower_bound(readings_.begin(), readings_.end(), start,
                               [](const Reading& r, DateTime v) { return r.timestamp < v; });
    auto hi = std::lower_bound(lo, readings_.end(), end, [](const Reading& r, DateTime v) { return r.timestamp < v; });
    auto coarse = aggregate(std::span<const Reading>(&*lo, static_cast<std::size_t>(hi - lo)), pr.freq, start,
                            static_cast<std::uint32_t>(i), cfg_.missing);
    if (coarse.interpolated) ++interpolated_;
    coarse.pseudonym = *pseudonym_;

    if (pr.nsc > 0.0) {
        coarse = perturb(coarse, NoiseParams::for_program(pr, cfg_.epsilon, cfg_.p_max_kwh_per_h), rng_);
        ++counters_.random_generations;
        ++counters_.arithmetic;
        if (coarse.clamped) ++clamp_events_;
    }

    AnonymousReport report;
    report.credential = chain_->links[n - 1 - i];
    if (i == 0) report.up_signature = up_sig_on_last_;
    report.program_id = pr.id;
    report.reading = minimize(coarse, pr.prp, cfg_.fields);
    report.tag = mac(*shared_key_, view(report_mac_input(report.reading.value, report.reading.pseudonym)));
    ++counters_.macs;

    const auto kind = i == 0 ? MessageKind::FirstReport : MessageKind::Report;
    const auto plain = report.encode();
    auto env = envelope_encrypt(up_pk_, view(plain), rng_,
                                envelope_block_size(plain.size(), up_pk_, envelope_blocks(kind)));
    ++counters_.asym_ops;
    retained(env);
    last_report_ = std::move(report);

    ++next_report_;
    if (next_report_ == n) transition(MeterPhase::Done);
    return env;
}

std::optional<TokenRelease> MeterAgent::release_token(DateTime now) const {
    if (phase_ != MeterPhase::Done || !token_) return std::nullopt;
    if (now < token_->active) return std::nullopt;
    return TokenRelease{*token_, *token_sig_};
}

std::size_t MeterAgent::state_bytes() const {
    const std::size_t k = keys_.pub.modulus_bytes();
    std::size_t total = 5 * k;  // e, n, d, p, q
    total += 2 * up_pk_.modulus_bytes() + 2 * agg_pk_.modulus_bytes();
    total += catalog_.size() * (program_record_size + 4);
    if (program_) total += program_record_size;
    if (chain_) total += chain_->size() * sizeof(Digest);
    if (bf_) total += 4 * k;
    if (up_sig_on_last_) total += k;
    if (token_) total += 40 + k;
    if (pseudonym_) total += sizeof(Uuid);
    if (shared_key_) total += sizeof(Digest);
    total += readings_.size() * sizeof(Reading);
    for (const auto& s : sent_) total += s.size();
    if (last_report_) total += 160;
    return total;
}

}  // namespace lwipsm
