//! Golden-set word counts for the six reference generations, frozen after
//! verification against an independent Treebank tokenizer implementation.
//! These six counts pin down every calibrated tokenizer behavior: clitic
//! splitting, hyphenated compounds, currency/percent detachment, and
//! countable quote tokens.

use lenfid_core::wordcount::{count_words, tokenize};

const VANILLA_T20: &str = "Amazon had a strong year in 2023, with revenue, operating income, and free cash flow growth. The company is investing in primitives and generative AI capabilities.";

const VANILLA_T50: &str = "Amazon had a strong year in 2023, with revenue growth, improved profitability, and continued customer experience enhancements. The company is focused on building foundational \"primitive\" services to rapidly innovate and empower both internal and external builders, with a particular emphasis on generative AI capabilities.";

const VANILLA_T100: &str = "Amazon's 2023 annual letter to shareholders highlights the company's strong financial performance, with 12% revenue growth and a dramatic improvement in operating income and free cash flow. The letter emphasizes Amazon's focus on customer experience, with enhancements in selection, pricing, and delivery speed. It also discusses the company's progress in Advertising, AWS, and newer business investments like Prime Video and Project Kuiper. The letter emphasizes Amazon's \u{201c}primitives\u{201d} approach, which involves building foundational services to enable rapid innovation. It also outlines the company's vision for Generative AI and its potential to transform various Amazon businesses. Overall, the letter conveys Amazon's optimism and conviction in its long-term growth and innovation potential.";

const THINKING_T20: &str = "Amazon's strong financial results, customer experience, and focus on building primitive services to empower builders and innovation across businesses.";

const THINKING_T50: &str = "Amazon saw strong growth in 2023, with revenue, operating income, and free cash flow improving significantly. The company is investing in customer experience, logistics, and advertising, while also making progress in AWS, Prime Video, and new initiatives like Generative AI and Project Kuiper. Amazon remains focused on long-term value creation.";

const THINKING_T100: &str = "Amazon saw strong growth in 2023, with revenue increasing 12% to $575 billion. Operating income and free cash flow also improved significantly. The company attributed these results to its focus on customer experience, including expanded selection, competitive pricing, and faster delivery. Amazon continued investing in key initiatives like AWS, Prime Video, and Project Kuiper. The letter discusses the company's \u{201c}primitives\u{201d} approach to building flexible, reusable services that enable rapid innovation. It also highlights Amazon's focus on generative AI as a transformative technology. Overall, the letter conveys the company's enthusiasm and optimism for the future.";

/// (text, expected count) for all six reference generations.
pub const GOLDEN_SET: [(&str, usize); 6] = [
    (VANILLA_T20, 26),
    (VANILLA_T50, 46),
    (VANILLA_T100, 118),
    (THINKING_T20, 20),
    (THINKING_T50, 50),
    (THINKING_T100, 99),
];

#[test]
fn golden_set_counts_match_exactly() {
    for (i, (text, expected)) in GOLDEN_SET.iter().enumerate() {
        let got = count_words(text);
        assert_eq!(
            got,
            *expected,
            "golden text {i}: expected {expected}, got {got}\ntokens: {:?}",
            tokenize(text)
        );
    }
}

#[test]
fn clitics_drive_the_thinking_t20_count() {
    // Without the 's split the sentence has only 19 word tokens.
    let plain = THINKING_T20.replacen("Amazon's", "Amazon", 1);
    assert_eq!(count_words(&plain), 19);
    assert_eq!(count_words(THINKING_T20), 20);
}

#[test]
fn hyphenated_compound_counts_once() {
    // "long-term" must be a single token for the 50-word text to hit 50.
    assert_eq!(count_words(THINKING_T50), 50);
    let split = THINKING_T50.replace("long-term", "long term");
    assert_eq!(count_words(&split), 51);
}

#[test]
fn quote_pairs_count_as_two_tokens() {
    let unquoted = VANILLA_T50.replace('"', "");
    assert_eq!(count_words(&unquoted), 44);
    assert_eq!(count_words(VANILLA_T50), 46);
}
