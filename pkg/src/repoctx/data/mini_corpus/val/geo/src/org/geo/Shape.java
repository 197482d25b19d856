package org.geo;

public abstract class Shape {
    protected final String name;

    protected Shape(String name) {
        this.name = name;
    }

    public abstract double area();

    public String label() {
        return name + "[" + area() + "]";
    }
}
