#include "lwipsm/messages.hpp"

#include "lwipsm/errors.hpp"

namespace lwipsm {

const PublicKey& KeyDirectory::at(const std::string& id) const {
    auto it = keys_.find(id);
    if (it == keys_.end()) throw ProtocolError("no public key registered for " + id);
    return it->second;
}

std::string_view to_string(MessageKind k) {
    switch (k) {
        case MessageKind::ProgramList: return "program_list";
        case MessageKind::Enrollment: return "enrollment";
        case MessageKind::Grant: return "grant";
        case MessageKind::SharedKeyProposal: return "shared_key_proposal";
        case MessageKind::FirstReport: return "first_report";
        case MessageKind::Report: return "report";
        case MessageKind::KeyDistribution: return "key_distribution";
        case MessageKind::CancelNotice: return "cancel_notice";
        case MessageKind::FilterBroadcast: return "filter_broadcast";
        case MessageKind::Redemption: return "redemption";
    }
    return "?";
}

std::size_t envelope_blocks(MessageKind k) {
    switch (k) {
        case MessageKind::Enrollment: return 8;
        case MessageKind::Grant: return 6;
        case MessageKind::SharedKeyProposal: return 4;
        case MessageKind::FirstReport: return 4;
        case MessageKind::Report: return 2;
        case MessageKind::KeyDistribution: return 4;
        case MessageKind::Redemption: return 4;
        default: return 1;
    }
}

void Token::encode(Encoder& e) const { e.f64(value).i64(exp.epoch).i64(active.epoch).fixed(uid); }

Token Token::decode(Decoder& d) {
    Token t;
    t.value = d.f64();
    t.exp = DateTime{d.i64()};
    t.active = DateTime{d.i64()};
    t.uid = d.fixed<16>();
    return t;
}

Bytes Token::bytes() const {
    Encoder e;
    encode(e);
    return std::move(e).take();
}

Bytes EnrollmentRequest::signed_part() const {
    Encoder e;
    encode_bigint(e, blinded);
    encode_program(e, program);
    return std::move(e).take();
}

Bytes EnrollmentRequest::encode() const {
    Encoder e;
    e.bytes(view(signed_part())).str(meter_id);
    encode_signature(e, sig);
    return std::move(e).take();
}

EnrollmentRequest EnrollmentRequest::decode(ByteView b) {
    Decoder d(b);
    EnrollmentRequest r;
    auto m = d.bytes();
    r.meter_id = d.str();
    r.sig = decode_signature(d, r.meter_id);
    d.expect_done();
    Decoder md(view(m));
    r.blinded = decode_bigint(md);
    r.program = decode_program(md);
    md.expect_done();
    return r;
}

Bytes GrantMessage::signed_part() const {
    Encoder e;
    encode_signature(e, blinded_sig);
    token.encode(e);
    encode_signature(e, token_sig);
    return std::move(e).take();
}

Bytes GrantMessage::encode() const {
    Encoder e;
    e.bytes(view(signed_part()));
    encode_signature(e, sig);
    return std::move(e).take();
}

GrantMessage GrantMessage::decode(ByteView b) {
    Decoder d(b);
    GrantMessage g;
    auto m = d.bytes();
    g.sig = decode_signature(d);
    d.expect_done();
    Decoder md(view(m));
    g.blinded_sig = decode_signature(md);
    g.token = Token::decode(md);
    g.token_sig = decode_signature(md);
    md.expect_done();
    return g;
}

Bytes KeyShare::encode() const {
    Encoder e;
    e.fixed(key.bytes).str(generator);
    encode_signature(e, sig);
    return std::move(e).take();
}

KeyShare KeyShare::decode(ByteView b) {
    Decoder d(b);
    KeyShare k;
    k.key.bytes = d.fixed<32>();
    k.generator = d.str();
    k.sig = decode_signature(d, k.generator);
    d.expect_done();
    return k;
}

Bytes AnonymousReport::encode() const {
    std::uint8_t mask = reading.fields;
    if (!reading.quality) mask &= static_cast<std::uint8_t>(~field_quality);
    if (!reading.reactive_kvarh) mask &= static_cast<std::uint8_t>(~field_reactive);
    if (!reading.firmware) mask &= static_cast<std::uint8_t>(~field_firmware);

    Encoder e;
    e.u8(up_signature ? 1 : 0).fixed(credential);
    if (up_signature) encode_signature(e, *up_signature);
    e.u32(program_id).u32(reading.interval_index).f64(reading.value).u8(reading.noisy ? 1 : 0).u8(mask);
    if (mask & field_quality) e.u8(*reading.quality);
    if (mask & field_reactive) e.f64(*reading.reactive_kvarh);
    if (mask & field_firmware) e.str(*reading.firmware);
    e.fixed(reading.pseudonym.uuid).fixed(tag.bytes);
    return std::move(e).take();
}

AnonymousReport AnonymousReport::decode(ByteView b) {
    Decoder d(b);
    AnonymousReport r;
    const auto flags = d.u8();
    if (flags > 1) throw DecodeError("unknown report flags");
    r.credential = d.fixed<32>();
    if (flags & 1) r.up_signature = decode_signature(d);
    r.program_id = d.u32();
    r.reading.interval_index = d.u32();
    r.reading.value = d.f64();
    const auto noisy = d.u8();
    if (noisy > 1) throw DecodeError("bad noisy flag");
    r.reading.noisy = noisy == 1;
    r.reading.fields = d.u8();
    if (r.reading.fields & ~all_fields) throw DecodeError("unknown reading field bits");
    if (r.reading.has(field_quality)) r.reading.quality = d.u8();
    if (r.reading.has(field_reactive)) r.reading.reactive_kvarh = d.f64();
    if (r.reading.has(field_firmware)) r.reading.firmware = d.str();
    r.reading.pseudonym.uuid = d.fixed<16>();
    r.tag.bytes = d.fixed<32>();
    d.expect_done();
    return r;
}

Bytes report_mac_input(double value, const Pseudonym& p) {
    Encoder e;
    e.f64(value).fixed(p.uuid);
    return std::move(e).take();
}

std::string_view to_string(RedemptionResult r) {
    switch (r) {
        case RedemptionResult::Granted: return "granted";
        case RedemptionResult::BadSignature: return "bad-signature";
        case RedemptionResult::NotActive: return "not-active";
        case RedemptionResult::Expired: return "expired";
        case RedemptionResult::AlreadySpent: return "already-spent";
        case RedemptionResult::UnknownUid: return "unknown-uid";
    }
    return "?";
}

Bytes RedemptionRequest::encode() const {
    Encoder e;
    token.encode(e);
    encode_signature(e, token_sig);
    return std::move(e).take();
}

RedemptionRequest RedemptionRequest::decode(ByteView b) {
    Decoder d(b);
    RedemptionRequest r;
    r.token = Token::decode(d);
    r.token_sig = decode_signature(d);
    d.expect_done();
    return r;
}

Bytes RedemptionReceipt::signed_part() const {
    Encoder e;
    e.fixed(uid).u8(static_cast<std::uint8_t>(result)).i64(at.epoch);
    return std::move(e).take();
}

}  // namespace lwipsm
