/** Shared frame clock for both panes: 10 fps by default, loops at the end.
 *
 * Frame k always shows step k of both trajectories, so a length-L query
 * plays exactly L frames per loop.
 */
export class PlaybackClock {
    private accumulatorMs = 0;
    frame = 0;
    playing = true;
    speed = 1;

    constructor(readonly length: number, readonly fps: number = 10) {
        if (length < 1) throw new Error('trajectory length must be >= 1');
    }

    private get framePeriodMs(): number {
        return 1000 / (this.fps * this.speed);
    }

    /** Advance the clock; returns true when the visible frame changed. */
    tick(elapsedMs: number): boolean {
        if (!this.playing) return false;
        this.accumulatorMs += elapsedMs;
        let moved = false;
        while (this.accumulatorMs >= this.framePeriodMs) {
            this.accumulatorMs -= this.framePeriodMs;
            this.frame = (this.frame + 1) % this.length; // loop on end
            moved = true;
        }
        return moved;
    }

    toggle(): void {
        this.playing = !this.playing;
    }

    restart(): void {
        this.frame = 0;
        this.accumulatorMs = 0;
    }

    setSpeed(multiplier: number): void {
        if (multiplier <= 0) throw new Error('speed must be positive');
        this.speed = multiplier;
    }
}
