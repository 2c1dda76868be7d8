/// Parses `8`, `16,32` or `start:end:step` ranges. A range always ends with
/// `end`, even when `end − start` is not a multiple of `step`.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let nums: Vec<usize> = part
            .split(':')
            .map(|x| x.trim().parse::<usize>().map_err(|_| format!("invalid size '{part}'")))
            .collect::<Result<_, _>>()?;
        match nums[..] {
            [n] => out.push(n),
            [start, end, step] => {
                if step == 0 || start > end {
                    return Err(format!("invalid range '{part}'"));
                }
                out.extend((start..=end).step_by(step));
                if out.last() != Some(&end) {
                    out.push(end);
                }
            }
            _ => return Err(format!("invalid size '{part}' (expected N or start:end:step)")),
        }
    }
    if out.is_empty() {
        return Err("no sizes given".into());
    }
    if out.contains(&0) {
        return Err("sizes must be positive".into());
    }
    Ok(out)
}
