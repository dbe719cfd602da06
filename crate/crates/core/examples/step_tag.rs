//! A STEP-Tag session on one stimulus: tags get created, rated and flagged;
//! two flags remove a tag and it can be created afresh.

use robovoice::hitl::step::{autocomplete, StepCommand, StepParams, StepReply, StepTag, TagAction};

fn main() -> robovoice::Result<()> {
    let ids = vec!["robot-07".to_string()];
    let mut exp = StepTag::new(&ids, StepParams { participants_per_stimulus: 6, ..StepParams::default() });
    let create = |t: &str| TagAction::Create { text: t.into() };
    let rate = |t: &str, s| TagAction::Rate { text: t.into(), stars: s };
    let flag = |t: &str| TagAction::Flag { text: t.into() };
    let sessions = vec![
        vec![create("metallic"), create("cute")],
        vec![rate("metallic", 5), flag("cute")],
        vec![rate("metallic", 4), flag("cute"), create("buzzy")],
        vec![create("Cute"), rate("buzzy", 2)],
        vec![flag("nonexistent")],
    ];
    let mut log = Vec::new();
    for (i, actions) in sessions.into_iter().enumerate() {
        let cmd = StepCommand::NextTrial { participant: format!("p{i}"), at_ms: 0 };
        let StepReply::Trial(t) = exp.apply(&cmd)? else { unreachable!() };
        log.push(cmd);
        let sub = StepCommand::Submit { trial: t.trial_id, actions };
        match exp.apply(&sub) {
            Ok(StepReply::Outcome(o)) => println!("p{i}: visible {:?}", o.visible_tags),
            Ok(_) => unreachable!(),
            Err(e) => println!("p{i}: rejected ({e})"),
        }
        log.push(sub);
    }
    for tag in exp.stimuli[0].tags.values() {
        println!(
            "{:<10} generation {} flags {} stars {:?} visible {}",
            tag.text, tag.generation, tag.flags, tag.stars, tag.is_visible()
        );
    }
    assert_eq!(StepTag::replay(&ids, exp.params.clone(), &log), exp);
    println!("replay of {} commands matches", log.len());
    println!("autocomplete \"me\": {:?}", autocomplete(&exp.usage, "me"));
    Ok(())
}
