package org.geo;

public class Square extends Rectangle {
    public Square(double side) {
        super("square", side, side);
    }

    public double side() {
        return width;
    }
}
