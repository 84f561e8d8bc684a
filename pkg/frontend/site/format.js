/** Display formatting: values render exactly as served, to 6 significant
 * digits, with no client-side arithmetic beyond the formatting itself. */
export function sig6(value) {
    if (value === 0)
        return "0.00000";
    return value.toPrecision(6);
}
export function pressureBar(pa) {
    return `${(pa / 1e5).toPrecision(3)} bar`;
}
