//! Renders the eight-level context ladder for the server-outage scenario and
//! compares each level with the reference prompt.

use knowloop::context::{assemble_context, reference_prompt, ScenarioFacts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let facts = ScenarioFacts::sap_reference();
    let mut previous_len = 0;
    for level in 1..=8u8 {
        let ctx = assemble_context(level, &facts, None)?;
        let reference = reference_prompt(level).expect("reference exists");
        let verdict = if ctx.text == reference { "identical" } else { "differs" };
        println!(
            "level {level}: {:>5} chars (+{:>5}), {} slots, reference {verdict}",
            ctx.text.len(),
            ctx.text.len().saturating_sub(previous_len),
            ctx.provenance.slots.len(),
        );
        if level <= 6 {
            println!("  {}", ctx.text);
        }
        previous_len = ctx.text.len();
    }
    Ok(())
}
