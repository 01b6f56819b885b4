export interface Maze {
    seed: number;
    goal: [number, number];
    /** [x_min, x_max, y_min, y_max] rectangles in the unit square */
    walls: [number, number, number, number][];
}

export type ActionName = 'Up' | 'Right' | 'Down' | 'Left';

/** One trajectory as served: [[x, y], action] per step */
export interface TrajectoryPayload {
    id: number;
    steps: [[number, number], ActionName][];
}

export interface QueryPayload {
    query_id: number;
    left: TrajectoryPayload;
    right: TrajectoryPayload;
}

export interface SessionInfo {
    maze: Maze;
    pending: number;
    answered: number;
    skipped: number;
}

export type Choice = 'left' | 'right' | 'skip';
